#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "dpm/harness.hpp"

namespace {

using namespace dpm;

int run_solve_ref(const std::string& pde, const std::string& segment,
                  const std::string& cache_dir, const std::string& csv_out) {
  ReferenceCache cache(cache_dir);
  const PdeId id = pde_from_name(pde);
  const Segment seg = segment_from_name(segment);
  const auto entry = cache.get(id, seg);
  std::printf("pde=%s segment=%s key=%016llx grid=%lldx%lld source=%s\n", pde.c_str(),
              segment.c_str(), static_cast<unsigned long long>(entry.key),
              static_cast<long long>(entry.solution->grid.ts.size()),
              static_cast<long long>(entry.solution->grid.xs.size()),
              entry.was_cached ? "cache" : "computed");
  if (!csv_out.empty()) export_reference_csv(*entry.solution, csv_out);
  return 0;
}

int run_train(const std::string& config_path, const std::string& cache_dir) {
  ExperimentConfig config = ExperimentConfig::from_config(ConfigFile::load(config_path));
  apply_env_overrides(config);
  ReferenceCache cache(cache_dir);
  const std::uint64_t seed = config.seeds.empty() ? 0 : config.seeds.front();
  const auto run_dir = std::filesystem::path(config.out_dir) /
                       (pde_name(config.pde) + "-" + method_name(config.method) +
                        "-seed" + std::to_string(seed));
  const RunRecord rec = execute_run(config, seed, cache, run_dir);
  std::printf("run_dir=%s\n", rec.run_dir.c_str());
  std::printf("validation rel_l2=%.6g test rel_l2=%.6g (%s)\n", rec.validation.rel_l2,
              rec.test.rel_l2, rec.stop_reason.c_str());
  return rec.aborted ? 2 : 0;
}

int run_eval(const std::string& checkpoint, const std::string& pde,
             const std::string& segment, const std::string& cache_dir,
             const std::string& out_csv) {
  const NetworkParams params = load_checkpoint(checkpoint);
  const PdeId id = pde_from_name(pde);
  const PdeSpec spec = pde_spec(id);
  if (params.spec.output_dim != spec.output_channels)
    throw std::runtime_error("eval: checkpoint output channels do not match pde");
  const Segment seg = segment_from_name(segment);
  ReferenceCache cache(cache_dir);
  const EvalGrid grid = build_eval_grid(spec, seg);
  const ReferenceSolution& ref = *cache.get(id, seg).solution;
  const MetricsReport m = compute_metrics(predict_grid_vector(params, spec, grid),
                                          reference_grid_vector(spec, ref));
  std::printf("pde,method,segment,rel_l2,explained_variance,max_error,mean_abs_error\n");
  std::printf("%s,checkpoint,%s,%.17g,%.17g,%.17g,%.17g\n", pde.c_str(), segment.c_str(),
              m.rel_l2, m.explained_variance, m.max_error, m.mean_abs_error);
  if (!out_csv.empty())
    write_metrics_csv({{id, Method::PINN, seg, m}}, out_csv);
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& cache_dir, int jobs,
              const std::string& resummarize) {
  if (!resummarize.empty()) {
    std::vector<RunRecord> records;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(resummarize))
      if (e.is_regular_file() && e.path().filename() == "record.json")
        files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) records.push_back(read_run_record(f));
    if (records.empty()) throw std::runtime_error("sweep: no records under " + resummarize);
    const auto summary = std::filesystem::path(resummarize) / "summary.csv";
    write_summary_csv(records, summary);
    std::printf("summary=%s records=%zu\n", summary.string().c_str(), records.size());
    return 0;
  }

  std::vector<ExperimentConfig> grid = expand_sweep(ConfigFile::load(config_path));
  for (auto& c : grid) apply_env_overrides(c);
  const std::string out_dir = grid.front().out_dir;
  ReferenceCache cache(cache_dir);
  const auto records = execute_sweep(grid, cache, out_dir, env_jobs(jobs));
  const auto summary = std::filesystem::path(out_dir) / "summary.csv";
  write_summary_csv(records, summary);
  int failures = 0;
  for (const auto& r : records)
    if (r.aborted) ++failures;
  std::printf("runs=%zu failures=%d summary=%s\n", records.size(), failures,
              summary.string().c_str());
  return 0;
}

int run_plot(const std::string& record_path, const std::string& cache_dir,
             const std::vector<double>& times, const std::string& out_dir) {
  const RunRecord rec = read_run_record(record_path);
  ReferenceCache cache(cache_dir);
  const auto dir = out_dir.empty() ? std::filesystem::path(rec.run_dir) / "plots"
                                   : std::filesystem::path(out_dir);
  for (const auto& p : plot_run(rec, cache, times, dir))
    std::printf("%s\n", p.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed network training with dynamic gradient pulling"};
  app.require_subcommand(1);

  std::string pde = "viscous-burgers", segment = "test", cache_dir = "ref-cache";
  std::string config_path, checkpoint, csv_out, record_path, out_dir, resummarize;
  std::vector<double> snapshot_times;
  int jobs = 1;

  auto* solve = app.add_subcommand("solve-ref", "Compute or load a cached reference solution");
  solve->add_option("--pde", pde, "Problem id")->required();
  solve->add_option("--segment", segment, "train|validation|test");
  solve->add_option("--cache", cache_dir, "Reference cache directory");
  solve->add_option("--csv", csv_out, "Also export the solution as CSV");

  auto* train = app.add_subcommand("train", "Train one configuration");
  train->add_option("--config", config_path, "Experiment config file")->required();
  train->add_option("--cache", cache_dir, "Reference cache directory");

  auto* eval = app.add_subcommand("eval", "Score a checkpoint against a reference");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--pde", pde, "Problem id")->required();
  eval->add_option("--segment", segment, "train|validation|test");
  eval->add_option("--cache", cache_dir, "Reference cache directory");
  eval->add_option("--out", csv_out, "Write the report as CSV");

  auto* sweep = app.add_subcommand("sweep", "Run a hyperparameter grid");
  sweep->add_option("--config", config_path, "Sweep config file (comma lists expand)");
  sweep->add_option("--cache", cache_dir, "Reference cache directory");
  sweep->add_option("--jobs", jobs, "Concurrent runs (env DPM_JOBS overrides)");
  sweep->add_option("--resummarize", resummarize, "Rebuild summary.csv from records in DIR");

  auto* plot = app.add_subcommand("plot", "Emit SVG plots for a finished run");
  plot->add_option("--record", record_path, "record.json of the run")->required();
  plot->add_option("--times", snapshot_times, "Snapshot times")->delimiter(',');
  plot->add_option("--cache", cache_dir, "Reference cache directory");
  plot->add_option("--out", out_dir, "Output directory (default <run>/plots)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (solve->parsed()) return run_solve_ref(pde, segment, cache_dir, csv_out);
    if (train->parsed()) return run_train(config_path, cache_dir);
    if (eval->parsed()) return run_eval(checkpoint, pde, segment, cache_dir, csv_out);
    if (sweep->parsed()) {
      if (resummarize.empty() && config_path.empty()) {
        std::fprintf(stderr, "sweep: --config or --resummarize required\n");
        return 1;
      }
      return run_sweep(config_path, cache_dir, jobs, resummarize);
    }
    if (plot->parsed()) return run_plot(record_path, cache_dir, snapshot_times, out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
