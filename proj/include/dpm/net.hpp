#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace dpm {

/// Shape of a fully-connected tanh network with optional residual skips.
/// `depth` counts hidden layers; the output layer is affine (no nonlinearity).
/// Residual skips connect consecutive equal-width hidden layers; the first
/// hidden layer and the output layer are never skipped.
struct LayerSpec {
  int input_dim = 2;
  int hidden_width = 20;
  int depth = 8;
  int output_dim = 1;
  bool residual = false;

  void validate() const;
  int num_weight_layers() const { return depth + 1; }
};

/// Value of the network together with its input derivatives at one point,
/// one entry per output channel.
struct Jet {
  Eigen::VectorXd u;
  Eigen::VectorXd du_dx;
  Eigen::VectorXd du_dt;
  Eigen::VectorXd d2u_dx2;
};

/// Batched jets, channel-major: each matrix is output_dim x batch.
struct JetBatch {
  Eigen::MatrixXd u;
  Eigen::MatrixXd du_dx;
  Eigen::MatrixXd du_dt;
  Eigen::MatrixXd d2u_dx2;

  Eigen::Index batch() const { return u.cols(); }
  Jet at(Eigen::Index i) const;
  static JetBatch zeros(Eigen::Index channels, Eigen::Index batch);
};

/// Trainable weights and biases. weights[l] maps layer input to layer output
/// (rows = fan-out), so weights[0] is hidden_width x input_dim and
/// weights[depth] is output_dim x hidden_width.
struct NetworkParams {
  LayerSpec spec;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  Eigen::Index parameter_count() const;

  /// Flat view in layer order: W0 row-major, b0, W1 row-major, b1, ...
  Eigen::VectorXd flatten() const;
};

NetworkParams unflatten(const LayerSpec& spec, const Eigen::VectorXd& flat);

/// Xavier-uniform weights, zero biases. Deterministic given seed; the draws
/// avoid std distribution objects so streams are identical across platforms.
NetworkParams init_params(const LayerSpec& spec, std::uint64_t seed);

/// Plain forward pass over a batch of (x, t) inputs: output_dim x batch.
Eigen::MatrixXd forward(const NetworkParams& params, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& t);

/// Forward pass carrying (u, u_x, u_t, u_xx) through every layer. The value
/// channel performs the same arithmetic as forward(), so .u matches it
/// bit-exactly.
JetBatch forward_jet(const NetworkParams& params, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& t);

Jet forward_jet_one(const NetworkParams& params, double x, double t);

/// One jet-propagating forward pass with per-layer caches, reusable for both
/// the jet readout and adjoint sweeps. Buffers persist across run() calls of
/// the same shape, so a training loop pays no per-epoch allocation.
/// The params passed to run() must outlive any grad() call.
class JetTape {
 public:
  JetTape() = default;
  JetTape(const NetworkParams& params, const Eigen::VectorXd& x,
          const Eigen::VectorXd& t) {
    run(params, x, t);
  }

  void run(const NetworkParams& params, const Eigen::VectorXd& x,
           const Eigen::VectorXd& t);

  const JetBatch& jets() const { return jets_; }

  /// Reverse-mode gradient of sum_i sum_c ( adj.u(c,i) * u(c,i)
  ///   + adj.du_dx(c,i) * u_x(c,i) + adj.du_dt(c,i) * u_t(c,i)
  ///   + adj.d2u_dx2(c,i) * u_xx(c,i) ) with respect to the flat parameters.
  /// Exact adjoint of the jet-propagating pass, including the third-order
  /// tanh term that the u_xx channel pulls in.
  Eigen::VectorXd grad(const JetBatch& adjoints);

 private:
  const NetworkParams* params_ = nullptr;
  Eigen::Index batch_ = 0;
  std::vector<Eigen::MatrixXd> in_;   // stacked layer inputs
  std::vector<Eigen::MatrixXd> act_;  // tanh value plus zx, zt, zxx per layer
  JetBatch jets_;
  Eigen::MatrixXd g_, gz_, gprev_;    // backward scratch
};

/// One-shot convenience wrapper around JetTape.
Eigen::VectorXd grad_params(const NetworkParams& params,
                            const Eigen::VectorXd& x, const Eigen::VectorXd& t,
                            const JetBatch& adjoints);

/// Checkpoint layout (little-endian):
///   bytes 0..7   magic "DPMNET1\0"
///   int32        input_dim, hidden_width, depth, output_dim
///   uint8        residual
///   uint64       parameter_count
///   float64[n]   flat parameters, same order as NetworkParams::flatten()
void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace dpm
