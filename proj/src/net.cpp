#include "dpm/net.hpp"

#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

namespace dpm {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Column block i of a [value | d/dx | d/dt | d2/dx2] stacked matrix.
inline auto blk(MatrixXd& m, int i, Index b) { return m.middleCols(i * b, b); }
inline auto blk(const MatrixXd& m, int i, Index b) { return m.middleCols(i * b, b); }

// tanh through the vectorized exp kernel; the scalar tanh loop dominates the
// profile at training batch sizes. Stable for all magnitudes.
template <typename Derived>
Eigen::ArrayXXd tanh_fast(const Eigen::ArrayBase<Derived>& x) {
  const Eigen::ArrayXXd e = (-2.0 * x.abs()).exp();
  return x.sign() * (1.0 - e) / (1.0 + e);
}

inline bool skip_at(const LayerSpec& s, int layer) {
  // Hidden layers after the first have equal widths; those are the skip sites.
  return s.residual && layer > 0 && layer < s.depth;
}

void check_inputs(const NetworkParams& p, const VectorXd& x, const VectorXd& t) {
  p.spec.validate();
  if (p.spec.input_dim != 2)
    throw std::invalid_argument("forward: network input_dim must be 2 for (x,t) batches");
  if (x.size() != t.size())
    throw std::invalid_argument("forward: x and t batches differ in length");
  if (static_cast<int>(p.weights.size()) != p.spec.num_weight_layers())
    throw std::invalid_argument("forward: params layer count does not match spec");
  for (int l = 0; l < p.spec.num_weight_layers(); ++l) {
    const int in = (l == 0) ? p.spec.input_dim : p.spec.hidden_width;
    const int out = (l == p.spec.depth) ? p.spec.output_dim : p.spec.hidden_width;
    if (p.weights[l].rows() != out || p.weights[l].cols() != in || p.biases[l].size() != out)
      throw std::invalid_argument("forward: weight shapes inconsistent with spec");
  }
}

}  // namespace

void LayerSpec::validate() const {
  if (depth < 1) throw std::invalid_argument("LayerSpec: depth must be >= 1");
  if (input_dim < 1 || hidden_width < 1 || output_dim < 1)
    throw std::invalid_argument("LayerSpec: all dimensions must be >= 1");
}

Jet JetBatch::at(Index i) const {
  return Jet{u.col(i), du_dx.col(i), du_dt.col(i), d2u_dx2.col(i)};
}

JetBatch JetBatch::zeros(Index channels, Index batch) {
  JetBatch j;
  j.u = MatrixXd::Zero(channels, batch);
  j.du_dx = MatrixXd::Zero(channels, batch);
  j.du_dt = MatrixXd::Zero(channels, batch);
  j.d2u_dx2 = MatrixXd::Zero(channels, batch);
  return j;
}

Eigen::Index NetworkParams::parameter_count() const {
  Index n = 0;
  for (size_t l = 0; l < weights.size(); ++l)
    n += weights[l].size() + biases[l].size();
  return n;
}

Eigen::VectorXd NetworkParams::flatten() const {
  VectorXd flat(parameter_count());
  Index k = 0;
  for (size_t l = 0; l < weights.size(); ++l) {
    const MatrixXd& w = weights[l];
    for (Index r = 0; r < w.rows(); ++r)
      for (Index c = 0; c < w.cols(); ++c) flat[k++] = w(r, c);
    flat.segment(k, biases[l].size()) = biases[l];
    k += biases[l].size();
  }
  return flat;
}

NetworkParams unflatten(const LayerSpec& spec, const Eigen::VectorXd& flat) {
  spec.validate();
  NetworkParams p;
  p.spec = spec;
  p.weights.resize(spec.num_weight_layers());
  p.biases.resize(spec.num_weight_layers());
  Index k = 0;
  for (int l = 0; l < spec.num_weight_layers(); ++l) {
    const int in = (l == 0) ? spec.input_dim : spec.hidden_width;
    const int out = (l == spec.depth) ? spec.output_dim : spec.hidden_width;
    if (k + Index(in) * out + out > flat.size())
      throw std::invalid_argument("unflatten: vector too short for spec");
    MatrixXd w(out, in);
    for (Index r = 0; r < out; ++r)
      for (Index c = 0; c < in; ++c) w(r, c) = flat[k++];
    p.weights[l] = std::move(w);
    p.biases[l] = flat.segment(k, out);
    k += out;
  }
  if (k != flat.size())
    throw std::invalid_argument("unflatten: vector length does not match spec");
  return p;
}

NetworkParams init_params(const LayerSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 gen(seed);
  // Top 53 bits -> [0,1); identical stream on every platform.
  auto uniform01 = [&gen]() {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
  };
  NetworkParams p;
  p.spec = spec;
  p.weights.resize(spec.num_weight_layers());
  p.biases.resize(spec.num_weight_layers());
  for (int l = 0; l < spec.num_weight_layers(); ++l) {
    const int in = (l == 0) ? spec.input_dim : spec.hidden_width;
    const int out = (l == spec.depth) ? spec.output_dim : spec.hidden_width;
    const double limit = std::sqrt(6.0 / (in + out));
    MatrixXd w(out, in);
    for (Index r = 0; r < out; ++r)
      for (Index c = 0; c < in; ++c) w(r, c) = limit * (2.0 * uniform01() - 1.0);
    p.weights[l] = std::move(w);
    p.biases[l] = VectorXd::Zero(out);
  }
  return p;
}

Eigen::MatrixXd forward(const NetworkParams& params, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& t) {
  check_inputs(params, x, t);
  const LayerSpec& s = params.spec;
  const Index b = x.size();

  MatrixXd h(2, b);
  h.row(0) = x.transpose();
  h.row(1) = t.transpose();

  MatrixXd z;
  for (int l = 0; l < s.depth; ++l) {
    z.noalias() = params.weights[l] * h;
    z.colwise() += params.biases[l];
    if (skip_at(s, l))
      h = tanh_fast(z.array()).matrix() + h;
    else
      h = tanh_fast(z.array()).matrix();
  }
  z.noalias() = params.weights[s.depth] * h;
  z.colwise() += params.biases[s.depth];
  return z;
}

JetBatch forward_jet(const NetworkParams& params, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& t) {
  check_inputs(params, x, t);
  const LayerSpec& s = params.spec;
  const Index b = x.size();

  // Stacked input: value block carries (x,t); d/dx block is (1,0), d/dt is
  // (0,1), d2/dx2 is zero.
  MatrixXd h = MatrixXd::Zero(2, 4 * b);
  h.row(0).segment(0, b) = x.transpose();
  h.row(1).segment(0, b) = t.transpose();
  h.row(0).segment(b, b).setOnes();
  h.row(1).segment(2 * b, b).setOnes();

  MatrixXd z, out;
  for (int l = 0; l < s.depth; ++l) {
    const int m = s.hidden_width;
    z.resize(m, 4 * b);
    // Value chain is a separate product so it rounds exactly like forward().
    blk(z, 0, b).noalias() = params.weights[l] * blk(h, 0, b);
    blk(z, 0, b).colwise() += params.biases[l];
    z.rightCols(3 * b).noalias() = params.weights[l] * h.rightCols(3 * b);

    out.resize(m, 4 * b);
    auto a = blk(out, 0, b);
    a = tanh_fast(blk(z, 0, b).array()).matrix();
    const auto sp = (1.0 - a.array().square()).eval();   // tanh'
    const auto spp = (-2.0 * a.array() * sp).eval();     // tanh''
    blk(out, 1, b) = (sp * blk(z, 1, b).array()).matrix();
    blk(out, 2, b) = (sp * blk(z, 2, b).array()).matrix();
    blk(out, 3, b) =
        (spp * blk(z, 1, b).array().square() + sp * blk(z, 3, b).array()).matrix();
    if (skip_at(s, l)) out += h;
    h.swap(out);
  }

  z.resize(s.output_dim, 4 * b);
  blk(z, 0, b).noalias() = params.weights[s.depth] * blk(h, 0, b);
  blk(z, 0, b).colwise() += params.biases[s.depth];
  z.rightCols(3 * b).noalias() = params.weights[s.depth] * h.rightCols(3 * b);

  JetBatch out_jet;
  out_jet.u = blk(z, 0, b);
  out_jet.du_dx = blk(z, 1, b);
  out_jet.du_dt = blk(z, 2, b);
  out_jet.d2u_dx2 = blk(z, 3, b);
  return out_jet;
}

Jet forward_jet_one(const NetworkParams& params, double x, double t) {
  VectorXd xs(1), ts(1);
  xs[0] = x;
  ts[0] = t;
  return forward_jet(params, xs, ts).at(0);
}

void JetTape::run(const NetworkParams& params, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& t) {
  check_inputs(params, x, t);
  params_ = &params;
  const LayerSpec& s = params.spec;
  const Index b = batch_ = x.size();

  in_.resize(s.depth + 1);
  act_.resize(s.depth);

  in_[0].setZero(2, 4 * b);
  in_[0].row(0).segment(0, b) = x.transpose();
  in_[0].row(1).segment(0, b) = t.transpose();
  in_[0].row(0).segment(b, b).setOnes();
  in_[0].row(1).segment(2 * b, b).setOnes();

  for (int l = 0; l < s.depth; ++l) {
    const int m = s.hidden_width;
    MatrixXd& z = act_[l];
    z.resize(m, 4 * b);
    blk(z, 0, b).noalias() = params.weights[l] * blk(in_[l], 0, b);
    blk(z, 0, b).colwise() += params.biases[l];
    z.rightCols(3 * b).noalias() = params.weights[l] * in_[l].rightCols(3 * b);
    blk(z, 0, b) = tanh_fast(blk(z, 0, b).array()).matrix();  // keep a, drop raw z

    const auto a = blk(z, 0, b).array();
    const auto sp = (1.0 - a.square()).eval();
    const auto spp = (-2.0 * a * sp).eval();

    MatrixXd& out = in_[l + 1];
    out.resize(m, 4 * b);
    blk(out, 0, b) = blk(z, 0, b);
    blk(out, 1, b) = (sp * blk(z, 1, b).array()).matrix();
    blk(out, 2, b) = (sp * blk(z, 2, b).array()).matrix();
    blk(out, 3, b) =
        (spp * blk(z, 1, b).array().square() + sp * blk(z, 3, b).array()).matrix();
    if (skip_at(s, l)) out += in_[l];
  }

  jets_.u.resize(s.output_dim, b);
  jets_.du_dx.resize(s.output_dim, b);
  jets_.du_dt.resize(s.output_dim, b);
  jets_.d2u_dx2.resize(s.output_dim, b);
  const MatrixXd& last = in_[s.depth];
  jets_.u.noalias() = params.weights[s.depth] * blk(last, 0, b);
  jets_.u.colwise() += params.biases[s.depth];
  jets_.du_dx.noalias() = params.weights[s.depth] * blk(last, 1, b);
  jets_.du_dt.noalias() = params.weights[s.depth] * blk(last, 2, b);
  jets_.d2u_dx2.noalias() = params.weights[s.depth] * blk(last, 3, b);
}

Eigen::VectorXd JetTape::grad(const JetBatch& adjoints) {
  if (params_ == nullptr) throw std::logic_error("JetTape::grad before run");
  const NetworkParams& params = *params_;
  const LayerSpec& s = params.spec;
  const Index b = batch_;
  if (adjoints.u.rows() != s.output_dim || adjoints.u.cols() != b ||
      adjoints.du_dx.rows() != s.output_dim || adjoints.du_dx.cols() != b ||
      adjoints.du_dt.rows() != s.output_dim || adjoints.du_dt.cols() != b ||
      adjoints.d2u_dx2.rows() != s.output_dim || adjoints.d2u_dx2.cols() != b)
    throw std::invalid_argument("JetTape::grad: adjoint shape does not match batch");

  VectorXd flat(params.parameter_count());
  Index tail = flat.size();
  // Weight gradients are written straight into the flat vector, last layer
  // first; each W block is row-major, matching NetworkParams::flatten().
  auto emit = [&](int layer, const MatrixXd& wgrad, const MatrixXd& gz0) {
    const Index rows = wgrad.rows(), cols = wgrad.cols();
    tail -= rows;
    for (Index r = 0; r < rows; ++r) flat[tail + r] = gz0.row(r).sum();
    tail -= rows * cols;
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) flat[tail + r * cols + c] = wgrad(r, c);
    (void)layer;
  };

  // Output layer is affine: the adjoint passes straight through.
  g_.resize(s.output_dim, 4 * b);
  blk(g_, 0, b) = adjoints.u;
  blk(g_, 1, b) = adjoints.du_dx;
  blk(g_, 2, b) = adjoints.du_dt;
  blk(g_, 3, b) = adjoints.d2u_dx2;

  MatrixXd wgrad;
  wgrad.noalias() = g_ * in_[s.depth].transpose();
  emit(s.depth, wgrad, blk(g_, 0, b));
  gprev_.noalias() = params.weights[s.depth].transpose() * g_;
  g_.swap(gprev_);

  for (int l = s.depth - 1; l >= 0; --l) {
    const auto a = blk(act_[l], 0, b).array();
    const auto zx = blk(act_[l], 1, b).array();
    const auto zt = blk(act_[l], 2, b).array();
    const auto zxx = blk(act_[l], 3, b).array();
    const auto sp = (1.0 - a.square()).eval();
    const auto spp = (-2.0 * a * sp).eval();
    const auto sppp = (sp * (6.0 * a.square() - 2.0)).eval();  // tanh'''

    const auto g0 = blk(g_, 0, b).array();
    const auto gx = blk(g_, 1, b).array();
    const auto gt = blk(g_, 2, b).array();
    const auto gxx = blk(g_, 3, b).array();

    gz_.resize(g_.rows(), 4 * b);
    blk(gz_, 0, b) = (g0 * sp + (gx * zx + gt * zt) * spp +
                      gxx * (sppp * zx.square() + spp * zxx))
                         .matrix();
    blk(gz_, 1, b) = (gx * sp + gxx * (2.0 * spp * zx)).matrix();
    blk(gz_, 2, b) = (gt * sp).matrix();
    blk(gz_, 3, b) = (gxx * sp).matrix();

    wgrad.noalias() = gz_ * in_[l].transpose();
    emit(l, wgrad, blk(gz_, 0, b));

    gprev_.noalias() = params.weights[l].transpose() * gz_;
    if (skip_at(s, l)) gprev_ += g_;
    g_.swap(gprev_);
  }
  return flat;
}

Eigen::VectorXd grad_params(const NetworkParams& params,
                            const Eigen::VectorXd& x, const Eigen::VectorXd& t,
                            const JetBatch& adjoints) {
  JetTape tape(params, x, t);
  return tape.grad(adjoints);
}

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  const char magic[8] = {'D', 'P', 'M', 'N', 'E', 'T', '1', '\0'};
  f.write(magic, 8);
  const std::int32_t dims[4] = {params.spec.input_dim, params.spec.hidden_width,
                                params.spec.depth, params.spec.output_dim};
  f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  const std::uint8_t res = params.spec.residual ? 1 : 0;
  f.write(reinterpret_cast<const char*>(&res), 1);
  const VectorXd flat = params.flatten();
  const std::uint64_t n = static_cast<std::uint64_t>(flat.size());
  f.write(reinterpret_cast<const char*>(&n), sizeof(n));
  f.write(reinterpret_cast<const char*>(flat.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!f) throw std::runtime_error("save_checkpoint: write failed on " + path.string());
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "DPMNET1\0", 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
  std::int32_t dims[4];
  f.read(reinterpret_cast<char*>(dims), sizeof(dims));
  std::uint8_t res = 0;
  f.read(reinterpret_cast<char*>(&res), 1);
  std::uint64_t n = 0;
  f.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!f) throw std::runtime_error("load_checkpoint: truncated header in " + path.string());
  LayerSpec spec{dims[0], dims[1], dims[2], dims[3], res != 0};
  VectorXd flat(static_cast<Index>(n));
  f.read(reinterpret_cast<char*>(flat.data()),
         static_cast<std::streamsize>(n * sizeof(double)));
  if (!f) throw std::runtime_error("load_checkpoint: truncated data in " + path.string());
  return unflatten(spec, flat);
}

}  // namespace dpm
