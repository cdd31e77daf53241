#include "dpm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace dpm {

namespace {

using json = nlohmann::json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t salt) {
  return splitmix64(root ^ (salt * 0xd1342543de82ef95ULL));
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

const char* kKnownKeys[] = {
    "run.pde",           "run.method",          "run.seeds",
    "run.out_dir",       "network.depth",       "network.width",
    "trainer.optimizer", "trainer.learning_rate", "trainer.alpha",
    "trainer.beta",      "trainer.max_epochs",  "trainer.patience",
    "trainer.min_improvement", "dpm.epsilon",   "dpm.delta0",
    "dpm.inflation",     "sampling.n_u",        "sampling.n_f",
};

void check_known_keys(const ConfigFile& file) {
  for (const auto& [key, _] : file.values) {
    bool known = false;
    for (const char* k : kKnownKeys)
      if (key == k) {
        known = true;
        break;
      }
    if (!known) throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

std::string method_display(Method m) {
  switch (m) {
    case Method::PINN: return "PINN";
    case Method::PINN_R: return "PINN-R";
    case Method::PINN_D1: return "PINN-D1";
    case Method::PINN_D2: return "PINN-D2";
    case Method::FC: return "FC";
    case Method::FC_R: return "FC-R";
  }
  return "?";
}

json metrics_to_json(const MetricsReport& m) {
  return json{{"rel_l2", m.rel_l2},
              {"explained_variance", m.explained_variance},
              {"max_error", m.max_error},
              {"mean_abs_error", m.mean_abs_error}};
}

MetricsReport metrics_from_json(const json& j) {
  return {j.at("rel_l2").get<double>(), j.at("explained_variance").get<double>(),
          j.at("max_error").get<double>(), j.at("mean_abs_error").get<double>()};
}

}  // namespace

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

ConfigFile ConfigFile::parse(const std::string& text) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config: bad section header at line " +
                                    std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty())
      throw std::invalid_argument("config: expected 'key = value' at line " +
                                  std::to_string(lineno));
    const std::string key = section + "." + trim(line.substr(0, eq));
    cfg.values[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

bool ConfigFile::has(const std::string& key) const { return values.count(key) > 0; }

std::string ConfigFile::get(const std::string& key, const std::string& fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  const auto it = values.find(key);
  if (it == values.end()) return fallback;
  size_t pos = 0;
  const double v = std::stod(it->second, &pos);
  if (pos != it->second.size())
    throw std::invalid_argument("config: bad number for " + key);
  return v;
}

int ConfigFile::get_int(const std::string& key, int fallback) const {
  const auto it = values.find(key);
  if (it == values.end()) return fallback;
  size_t pos = 0;
  const int v = std::stoi(it->second, &pos);
  if (pos != it->second.size())
    throw std::invalid_argument("config: bad integer for " + key);
  return v;
}

std::vector<std::string> ConfigFile::get_list(const std::string& key) const {
  std::vector<std::string> out;
  const auto it = values.find(key);
  if (it == values.end()) return out;
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ExperimentConfig ExperimentConfig::from_config(const ConfigFile& file) {
  check_known_keys(file);
  ExperimentConfig c;
  c.pde = pde_from_name(file.get("run.pde", "viscous-burgers"));
  c.method = method_from_name(file.get("run.method", "pinn"));
  c.depth = file.get_int("network.depth", c.depth);
  c.width = file.get_int("network.width", c.width);
  c.alpha = file.get_double("trainer.alpha", c.alpha);
  c.beta = file.get_double("trainer.beta", c.beta);
  c.learning_rate = file.get_double("trainer.learning_rate", c.learning_rate);
  c.optimizer = optimizer_from_name(file.get("trainer.optimizer", "adam"));
  c.max_epochs = file.get_int("trainer.max_epochs", c.max_epochs);
  c.patience = file.get_int("trainer.patience", c.patience);
  c.min_improvement = file.get_double("trainer.min_improvement", c.min_improvement);
  c.epsilon = file.get_double("dpm.epsilon", c.epsilon);
  c.delta0 = file.get_double("dpm.delta0", c.delta0);
  c.inflation = file.get_double("dpm.inflation", c.inflation);
  c.n_u = file.get_int("sampling.n_u", c.n_u);
  c.n_f = file.get_int("sampling.n_f", c.n_f);
  c.out_dir = file.get("run.out_dir", c.out_dir);
  const auto seeds = file.get_list("run.seeds");
  if (!seeds.empty()) {
    c.seeds.clear();
    for (const auto& s : seeds) c.seeds.push_back(std::stoull(s));
  }
  return c;
}

int ExperimentConfig::resolved_n_f() const {
  if (n_f >= 0) return n_f;
  return (pde == PdeId::Nls || pde == PdeId::AllenCahn) ? 20000 : 10000;
}

LayerSpec ExperimentConfig::layer_spec() const {
  LayerSpec s;
  s.input_dim = 2;
  s.hidden_width = width;
  s.depth = depth;
  s.output_dim = pde_spec(pde).output_channels;
  s.residual = method_uses_residual_net(method);
  return s;
}

TrainerConfig ExperimentConfig::trainer_config(std::uint64_t seed) const {
  TrainerConfig t;
  t.method = method;
  t.layers = layer_spec();
  t.alpha = alpha;
  t.beta = beta;
  t.learning_rate = learning_rate;
  t.optimizer = optimizer;
  t.max_epochs = max_epochs;
  t.patience = patience;
  t.min_improvement = min_improvement;
  t.seed = seed;
  t.epsilon = epsilon;
  t.delta0 = delta0;
  t.inflation = inflation;
  t.validate();
  return t;
}

std::vector<ExperimentConfig> expand_sweep(const ConfigFile& file) {
  check_known_keys(file);
  static const char* kListKeys[] = {
      "run.method",       "network.depth",  "network.width",
      "trainer.learning_rate", "trainer.alpha", "trainer.beta",
      "dpm.epsilon",      "dpm.delta0",     "dpm.inflation",
  };
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const char* key : kListKeys) {
    auto vals = file.get_list(key);
    if (vals.size() > 1) axes.push_back({key, std::move(vals)});
  }
  std::vector<ExperimentConfig> grid;
  std::vector<size_t> idx(axes.size(), 0);
  while (true) {
    ConfigFile point = file;
    for (size_t a = 0; a < axes.size(); ++a)
      point.values[axes[a].first] = axes[a].second[idx[a]];
    grid.push_back(ExperimentConfig::from_config(point));
    size_t a = 0;
    for (; a < axes.size(); ++a) {
      if (++idx[a] < axes[a].second.size()) break;
      idx[a] = 0;
    }
    if (a == axes.size()) break;
  }
  return grid;
}

void apply_env_overrides(ExperimentConfig& config) {
  if (const char* dir = std::getenv("DPM_OUT_DIR")) config.out_dir = dir;
}

int env_jobs(int fallback) {
  if (const char* jobs = std::getenv("DPM_JOBS")) {
    const int j = std::atoi(jobs);
    if (j >= 1) return j;
  }
  return fallback;
}

std::uint64_t grid_hash(PdeId id, const EvalGrid& grid) {
  std::uint64_t h = 1469598103934665603ULL;
  const std::string name = pde_name(id);
  h = fnv1a(h, name.data(), name.size());
  const auto seg = static_cast<std::uint8_t>(grid.segment);
  h = fnv1a(h, &seg, 1);
  const std::uint64_t nx = grid.xs.size(), nt = grid.ts.size();
  h = fnv1a(h, &nx, sizeof(nx));
  h = fnv1a(h, &nt, sizeof(nt));
  h = fnv1a(h, grid.xs.data(), sizeof(double) * grid.xs.size());
  h = fnv1a(h, grid.ts.data(), sizeof(double) * grid.ts.size());
  return h;
}

void save_reference_bin(const ReferenceSolution& sol, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("reference cache: cannot open " + path.string());
  f.write("DPMREF01", 8);
  auto write_u64 = [&f](std::uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
  const auto seg = static_cast<std::uint8_t>(sol.grid.segment);
  f.write(reinterpret_cast<const char*>(&seg), 1);
  write_u64(static_cast<std::uint64_t>(sol.grid.xs.size()));
  f.write(reinterpret_cast<const char*>(sol.grid.xs.data()), 8 * sol.grid.xs.size());
  write_u64(static_cast<std::uint64_t>(sol.grid.ts.size()));
  f.write(reinterpret_cast<const char*>(sol.grid.ts.data()), 8 * sol.grid.ts.size());
  write_u64(static_cast<std::uint64_t>(sol.channels.size()));
  for (const auto& ch : sol.channels) {
    // row-major [t][x]
    for (Eigen::Index it = 0; it < ch.rows(); ++it)
      f.write(reinterpret_cast<const char*>(ch.row(it).eval().data()), 8 * ch.cols());
  }
  write_u64(static_cast<std::uint64_t>(sol.invariant_trace.size()));
  for (const auto& [t, v] : sol.invariant_trace) {
    f.write(reinterpret_cast<const char*>(&t), 8);
    f.write(reinterpret_cast<const char*>(&v), 8);
  }
  if (!f) throw std::runtime_error("reference cache: write failed on " + path.string());
}

ReferenceSolution load_reference_bin(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("reference cache: cannot open " + path.string());
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "DPMREF01", 8) != 0)
    throw std::runtime_error("reference cache: bad magic in " + path.string());
  auto read_u64 = [&f]() {
    std::uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  ReferenceSolution sol;
  std::uint8_t seg = 0;
  f.read(reinterpret_cast<char*>(&seg), 1);
  sol.grid.segment = static_cast<Segment>(seg);
  const auto nx = static_cast<Eigen::Index>(read_u64());
  sol.grid.xs.resize(nx);
  f.read(reinterpret_cast<char*>(sol.grid.xs.data()), 8 * nx);
  const auto nt = static_cast<Eigen::Index>(read_u64());
  sol.grid.ts.resize(nt);
  f.read(reinterpret_cast<char*>(sol.grid.ts.data()), 8 * nt);
  const auto channels = read_u64();
  sol.channels.resize(channels);
  std::vector<double> row(nx);
  for (auto& ch : sol.channels) {
    ch.resize(nt, nx);
    for (Eigen::Index it = 0; it < nt; ++it) {
      f.read(reinterpret_cast<char*>(row.data()), 8 * nx);
      for (Eigen::Index ix = 0; ix < nx; ++ix) ch(it, ix) = row[ix];
    }
  }
  const auto trace_len = read_u64();
  sol.invariant_trace.resize(trace_len);
  for (auto& [t, v] : sol.invariant_trace) {
    f.read(reinterpret_cast<char*>(&t), 8);
    f.read(reinterpret_cast<char*>(&v), 8);
  }
  if (!f) throw std::runtime_error("reference cache: truncated file " + path.string());
  return sol;
}

ReferenceCache::ReferenceCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path ReferenceCache::file_for(PdeId id, Segment segment) const {
  const EvalGrid grid = build_eval_grid(pde_spec(id), segment);
  const std::uint64_t key = grid_hash(id, grid);
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(key));
  return dir_ / (pde_name(id) + "-" + segment_name(segment) + "-" + hex + ".bin");
}

ReferenceCache::Entry ReferenceCache::get(PdeId id, Segment segment) {
  std::scoped_lock lock(mutex_);
  const auto memo_key = std::make_pair(id, segment);
  const EvalGrid grid = build_eval_grid(pde_spec(id), segment);
  const std::uint64_t key = grid_hash(id, grid);
  if (const auto it = memo_.find(memo_key); it != memo_.end())
    return {&it->second, key, true};

  const std::filesystem::path file = file_for(id, segment);
  if (std::filesystem::exists(file)) {
    auto [it, _] = memo_.emplace(memo_key, load_reference_bin(file));
    return {&it->second, key, true};
  }

  ReferenceSolution sol = solve_reference(pde_spec(id), grid);
  const std::filesystem::path tmp = file.string() + ".tmp" + std::to_string(
      static_cast<unsigned long long>(splitmix64(key ^ std::random_device{}())));
  save_reference_bin(sol, tmp);
  std::filesystem::rename(tmp, file);
  auto [it, _] = memo_.emplace(memo_key, std::move(sol));
  return {&it->second, key, false};
}

void write_run_record(const RunRecord& rec, const std::filesystem::path& path) {
  json j;
  j["config"] = {
      {"pde", pde_name(rec.config.pde)},
      {"method", method_name(rec.config.method)},
      {"depth", rec.config.depth},
      {"width", rec.config.width},
      {"alpha", rec.config.alpha},
      {"beta", rec.config.beta},
      {"learning_rate", rec.config.learning_rate},
      {"optimizer", optimizer_name(rec.config.optimizer)},
      {"max_epochs", rec.config.max_epochs},
      {"patience", rec.config.patience},
      {"min_improvement", rec.config.min_improvement},
      {"epsilon", rec.config.epsilon},
      {"delta0", rec.config.delta0},
      {"inflation", rec.config.inflation},
      {"n_u", rec.config.n_u},
      {"n_f", rec.config.resolved_n_f()},
  };
  j["seed"] = rec.seed;
  j["validation"] = metrics_to_json(rec.validation);
  j["test"] = metrics_to_json(rec.test);
  j["history_csv"] = rec.history_csv;
  j["checkpoint"] = rec.checkpoint;
  j["metrics_csv"] = rec.metrics_csv;
  j["duration_seconds"] = rec.duration_seconds;
  j["aborted"] = rec.aborted;
  j["stop_reason"] = rec.stop_reason;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("run record: cannot open " + path.string());
  f << j.dump(2) << "\n";
}

RunRecord read_run_record(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("run record: cannot open " + path.string());
  json j;
  f >> j;
  RunRecord rec;
  const json& c = j.at("config");
  rec.config.pde = pde_from_name(c.at("pde").get<std::string>());
  rec.config.method = method_from_name(c.at("method").get<std::string>());
  rec.config.depth = c.at("depth").get<int>();
  rec.config.width = c.at("width").get<int>();
  rec.config.alpha = c.at("alpha").get<double>();
  rec.config.beta = c.at("beta").get<double>();
  rec.config.learning_rate = c.at("learning_rate").get<double>();
  rec.config.optimizer = optimizer_from_name(c.at("optimizer").get<std::string>());
  rec.config.max_epochs = c.at("max_epochs").get<int>();
  rec.config.patience = c.at("patience").get<int>();
  rec.config.min_improvement = c.at("min_improvement").get<double>();
  rec.config.epsilon = c.at("epsilon").get<double>();
  rec.config.delta0 = c.at("delta0").get<double>();
  rec.config.inflation = c.at("inflation").get<double>();
  rec.config.n_u = c.at("n_u").get<int>();
  rec.config.n_f = c.at("n_f").get<int>();
  rec.seed = j.at("seed").get<std::uint64_t>();
  rec.validation = metrics_from_json(j.at("validation"));
  rec.test = metrics_from_json(j.at("test"));
  rec.history_csv = j.at("history_csv").get<std::string>();
  rec.checkpoint = j.at("checkpoint").get<std::string>();
  rec.metrics_csv = j.at("metrics_csv").get<std::string>();
  rec.duration_seconds = j.at("duration_seconds").get<double>();
  rec.aborted = j.at("aborted").get<bool>();
  rec.stop_reason = j.at("stop_reason").get<std::string>();
  rec.run_dir = path.parent_path().string();
  return rec;
}

void write_metrics_csv(
    const std::vector<std::tuple<PdeId, Method, Segment, MetricsReport>>& rows,
    const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("metrics csv: cannot open " + path.string());
  f << "pde,method,segment,rel_l2,explained_variance,max_error,mean_abs_error\n";
  f.precision(17);
  for (const auto& [pde, method, segment, m] : rows)
    f << pde_name(pde) << "," << method_name(method) << "," << segment_name(segment)
      << "," << m.rel_l2 << "," << m.explained_variance << "," << m.max_error << ","
      << m.mean_abs_error << "\n";
}

TrainSet build_augmented_set(const PdeSpec& spec, int n_u, int n_r,
                             std::uint64_t seed, const ReferenceSolution& train_ref) {
  TrainSet set = build_train_set(spec, n_u, 0, seed);

  // Interpolation table over [0, T_train] with the initial condition as the
  // t = 0 row.
  const Eigen::VectorXd& xs = train_ref.grid.xs;
  const Eigen::Index nx = xs.size();
  const Eigen::Index nt = train_ref.grid.ts.size() + 1;
  std::vector<double> ts(nt);
  ts[0] = 0.0;
  for (Eigen::Index i = 1; i < nt; ++i) ts[i] = train_ref.grid.ts[i - 1];
  std::vector<Eigen::MatrixXd> table(train_ref.channels.size());
  for (size_t c = 0; c < table.size(); ++c) {
    table[c].resize(nt, nx);
    for (Eigen::Index ix = 0; ix < nx; ++ix)
      table[c](0, ix) = initial_condition(spec, xs[ix])[static_cast<Eigen::Index>(c)];
    table[c].bottomRows(nt - 1) = train_ref.channels[c];
  }

  auto locate = [](const auto& axis, Eigen::Index n, double v) {
    Eigen::Index i = 0;
    while (i + 2 < n && axis[i + 1] <= v) ++i;
    return i;
  };
  auto interpolate = [&](double x, double t) {
    const Eigen::Index ix = locate(xs, nx, x);
    const Eigen::Index it = locate(ts, nt, t);
    const double ax = std::clamp((x - xs[ix]) / (xs[ix + 1] - xs[ix]), 0.0, 1.0);
    const double at = std::clamp((t - ts[it]) / (ts[it + 1] - ts[it]), 0.0, 1.0);
    Eigen::VectorXd out(table.size());
    for (size_t c = 0; c < table.size(); ++c) {
      const auto& m = table[c];
      out[static_cast<Eigen::Index>(c)] =
          (1 - at) * ((1 - ax) * m(it, ix) + ax * m(it, ix + 1)) +
          at * ((1 - ax) * m(it + 1, ix) + ax * m(it + 1, ix + 1));
    }
    return out;
  };

  std::mt19937_64 gen(derive_seed(seed, 3));
  auto uniform01 = [&gen]() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
  const double t_train = time_split(spec.final_time).t_train;
  for (int i = 0; i < n_r; ++i) {
    const double x = spec.x_min + uniform01() * (spec.x_max - spec.x_min);
    const double t = uniform01() * t_train;
    set.data_points.push_back({x, t, interpolate(x, t)});
  }
  return set;
}

RunRecord execute_run(const ExperimentConfig& config, std::uint64_t seed,
                      ReferenceCache& cache, const std::filesystem::path& run_dir) {
  const auto t_start = std::chrono::steady_clock::now();
  const PdeSpec spec = pde_spec(config.pde);
  const EvalGrid val_grid = build_eval_grid(spec, Segment::Validation);
  const EvalGrid test_grid = build_eval_grid(spec, Segment::Test);
  const ReferenceSolution& ref_val = *cache.get(config.pde, Segment::Validation).solution;
  const ReferenceSolution& ref_test = *cache.get(config.pde, Segment::Test).solution;

  std::filesystem::create_directories(run_dir);

  const TrainerConfig tc = config.trainer_config(derive_seed(seed, 1));
  const std::uint64_t sample_seed = derive_seed(seed, 2);

  TrainResult result;
  if (method_is_regression(config.method)) {
    const ReferenceSolution& ref_train = *cache.get(config.pde, Segment::Train).solution;
    const TrainSet set = build_augmented_set(spec, config.n_u, config.resolved_n_f(),
                                             sample_seed, ref_train);
    result = train_regression(tc, spec, set, val_grid, ref_val);
  } else {
    const TrainSet set =
        build_train_set(spec, config.n_u, config.resolved_n_f(), sample_seed);
    result = train(tc, spec, set, val_grid, ref_val);
  }

  RunRecord rec;
  rec.config = config;
  rec.seed = seed;
  rec.run_dir = run_dir.string();
  rec.history_csv = "history.csv";
  rec.checkpoint = "checkpoint.bin";
  rec.metrics_csv = "metrics.csv";
  rec.aborted = result.history.aborted;
  rec.stop_reason = result.history.stop_reason;

  result.history.to_csv(run_dir / rec.history_csv);
  save_checkpoint(result.params, run_dir / rec.checkpoint);

  rec.validation = compute_metrics(predict_grid_vector(result.params, spec, val_grid),
                                   reference_grid_vector(spec, ref_val));
  rec.test = compute_metrics(predict_grid_vector(result.params, spec, test_grid),
                             reference_grid_vector(spec, ref_test));
  write_metrics_csv({{config.pde, config.method, Segment::Validation, rec.validation},
                     {config.pde, config.method, Segment::Test, rec.test}},
                    run_dir / rec.metrics_csv);

  rec.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  write_run_record(rec, run_dir / "record.json");
  return rec;
}

std::vector<RunRecord> execute_sweep(const std::vector<ExperimentConfig>& grid,
                                     ReferenceCache& cache,
                                     const std::filesystem::path& out_dir, int jobs) {
  if (grid.empty()) throw std::invalid_argument("sweep: empty configuration grid");
  struct Task {
    const ExperimentConfig* config;
    std::uint64_t seed;
    std::string dir_name;
  };
  std::vector<Task> tasks;
  for (size_t i = 0; i < grid.size(); ++i)
    for (const std::uint64_t seed : grid[i].seeds) {
      char name[160];
      std::snprintf(name, sizeof(name), "run-%03zu-%s-%s-seed%llu", i,
                    pde_name(grid[i].pde).c_str(), method_name(grid[i].method).c_str(),
                    static_cast<unsigned long long>(seed));
      tasks.push_back({&grid[i], seed, name});
    }

  // Warm the reference cache serially so workers only read.
  for (const auto& c : grid) {
    cache.get(c.pde, Segment::Validation);
    cache.get(c.pde, Segment::Test);
    if (method_is_regression(c.method)) cache.get(c.pde, Segment::Train);
  }

  std::vector<RunRecord> records(tasks.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& task = tasks[i];
      try {
        records[i] = execute_run(*task.config, task.seed, cache, out_dir / task.dir_name);
      } catch (const std::exception& e) {
        records[i].config = *task.config;
        records[i].seed = task.seed;
        records[i].run_dir = (out_dir / task.dir_name).string();
        records[i].aborted = true;
        records[i].stop_reason = e.what();
      }
    }
  };

  const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return records;
}

void write_summary_csv(const std::vector<RunRecord>& records,
                       const std::filesystem::path& path) {
  static const Method kMethodOrder[] = {Method::PINN, Method::PINN_R, Method::PINN_D1,
                                        Method::PINN_D2, Method::FC, Method::FC_R};
  static const PdeId kPdeOrder[] = {PdeId::ViscousBurgers, PdeId::InviscidBurgers,
                                    PdeId::Nls, PdeId::AllenCahn};

  std::vector<Method> methods;
  for (Method m : kMethodOrder)
    for (const auto& r : records)
      if (r.config.method == m) {
        methods.push_back(m);
        break;
      }
  std::vector<PdeId> pdes;
  for (PdeId p : kPdeOrder)
    for (const auto& r : records)
      if (r.config.pde == p) {
        pdes.push_back(p);
        break;
      }

  std::ofstream f(path);
  if (!f) throw std::runtime_error("summary: cannot open " + path.string());
  f << "pde";
  for (Method m : methods) {
    const std::string d = method_display(m);
    f << "," << d << ":rel_l2," << d << ":explained_variance," << d << ":max_error,"
      << d << ":mean_abs_error";
  }
  f << "\n";
  f.precision(17);
  for (PdeId p : pdes) {
    f << pde_name(p);
    for (Method m : methods) {
      const RunRecord* best = nullptr;
      for (const auto& r : records)
        if (r.config.pde == p && r.config.method == m && !r.aborted &&
            (best == nullptr || r.validation.rel_l2 < best->validation.rel_l2))
          best = &r;
      if (best == nullptr) {
        f << ",,,,";
      } else {
        f << "," << best->test.rel_l2 << "," << best->test.explained_variance << ","
          << best->test.max_error << "," << best->test.mean_abs_error;
      }
    }
    f << "\n";
  }
}

}  // namespace dpm
