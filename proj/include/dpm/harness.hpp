#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "dpm/metrics.hpp"
#include "dpm/refsolvers.hpp"
#include "dpm/trainer.hpp"

namespace dpm {

/// Flat key=value file with [section] headers. Comments start with '#'.
/// Values keep their raw text; list-valued keys are comma-separated.
struct ConfigFile {
  std::map<std::string, std::string> values;  // "section.key" -> text

  static ConfigFile load(const std::filesystem::path& path);
  static ConfigFile parse(const std::string& text);

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;
};

/// One experiment: problem, method, architecture, optimizer settings,
/// pulling-rule knobs, sampling sizes, seeds and output directory.
struct ExperimentConfig {
  PdeId pde = PdeId::ViscousBurgers;
  Method method = Method::PINN;
  int depth = 8;
  int width = 20;
  double alpha = 1.0;
  double beta = 1.0;
  double learning_rate = 5e-3;
  Optimizer optimizer = Optimizer::Adam;
  int max_epochs = 10000;
  int patience = 50;
  double min_improvement = 1e-5;
  double epsilon = 1e-3;
  double delta0 = 1e-2;
  double inflation = 1.01;
  int n_u = 100;
  int n_f = -1;  // -1: per-problem default (10000 Burgers, 20000 NLS/AC)
  std::vector<std::uint64_t> seeds = {0};
  std::string out_dir = "runs";

  static ExperimentConfig from_config(const ConfigFile& file);

  int resolved_n_f() const;
  LayerSpec layer_spec() const;
  TrainerConfig trainer_config(std::uint64_t seed) const;
};

/// Expands list-valued keys (method, depth, width, learning_rate, alpha,
/// beta, epsilon, delta0, inflation) into the cartesian grid.
std::vector<ExperimentConfig> expand_sweep(const ConfigFile& file);

/// Environment overrides: DPM_OUT_DIR replaces the configured output
/// directory, DPM_JOBS sets the sweep parallelism degree.
void apply_env_overrides(ExperimentConfig& config);
int env_jobs(int fallback);

std::uint64_t grid_hash(PdeId id, const EvalGrid& grid);

void save_reference_bin(const ReferenceSolution& sol, const std::filesystem::path& path);
ReferenceSolution load_reference_bin(const std::filesystem::path& path);

/// Disk-backed reference store keyed by (pde, grid hash). Safe for concurrent
/// readers with single-writer creation (temp file + atomic rename).
class ReferenceCache {
 public:
  explicit ReferenceCache(std::filesystem::path dir);

  struct Entry {
    const ReferenceSolution* solution;
    std::uint64_t key;
    bool was_cached;  // served from disk rather than recomputed
  };
  Entry get(PdeId id, Segment segment);

  std::filesystem::path file_for(PdeId id, Segment segment) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<std::pair<PdeId, Segment>, ReferenceSolution> memo_;
};

struct RunRecord {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  MetricsReport validation{};
  MetricsReport test{};
  std::string run_dir;
  std::string history_csv;
  std::string checkpoint;
  std::string metrics_csv;
  double duration_seconds = 0.0;
  bool aborted = false;
  std::string stop_reason;
};

void write_run_record(const RunRecord& rec, const std::filesystem::path& path);
RunRecord read_run_record(const std::filesystem::path& path);

/// One CSV row per (pde, method, segment) with the four metrics.
void write_metrics_csv(const std::vector<std::tuple<PdeId, Method, Segment, MetricsReport>>& rows,
                       const std::filesystem::path& path);

/// Labeled set for the regression baselines: the usual initial/boundary
/// tuples plus n_r interior points labeled by interpolating the reference
/// solution over the training window.
TrainSet build_augmented_set(const PdeSpec& spec, int n_u, int n_r,
                             std::uint64_t seed, const ReferenceSolution& train_ref);

/// Trains one (config, seed) pair and writes history, checkpoint, metrics
/// and record.json under run_dir.
RunRecord execute_run(const ExperimentConfig& config, std::uint64_t seed,
                      ReferenceCache& cache, const std::filesystem::path& run_dir);

/// All (config, seed) runs, optionally `jobs`-way concurrent. Failed runs are
/// recorded (aborted flag) and the sweep continues.
std::vector<RunRecord> execute_sweep(const std::vector<ExperimentConfig>& grid,
                                     ReferenceCache& cache,
                                     const std::filesystem::path& out_dir, int jobs);

/// Table-shaped summary: one row per problem, method x metric columns, each
/// cell from the record with the best validation rel_l2 for that pair.
/// Pure function of the records; byte-identical on regeneration.
void write_summary_csv(const std::vector<RunRecord>& records,
                       const std::filesystem::path& path);

/// Emits {pde}-{method}-heatmap.svg, -losses.svg and -snapshot-{t}.svg files
/// for a finished run. Snapshot times snap to the nearest grid time.
std::vector<std::filesystem::path> plot_run(const RunRecord& rec, ReferenceCache& cache,
                                            const std::vector<double>& snapshot_times,
                                            const std::filesystem::path& out_dir);

}  // namespace dpm
