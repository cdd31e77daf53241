#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dpm/harness.hpp"

namespace dpm {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Rgb {
  int r, g, b;
};

Rgb lerp(Rgb a, Rgb b, double t) {
  auto mix = [t](int x, int y) { return static_cast<int>(std::lround(x + t * (y - x))); };
  return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

// Diverging blue-gray-red map on [0,1].
std::string color_hex(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const Rgb lo{59, 76, 192}, mid{221, 221, 221}, hi{180, 4, 38};
  const Rgb c = v < 0.5 ? lerp(lo, mid, 2.0 * v) : lerp(mid, hi, 2.0 * (v - 0.5));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// Field assembled over the three segments, magnitudes for the complex problem.
struct Field {
  VectorXd xs;
  std::vector<double> ts;
  MatrixXd ref;   // nt x nx
  MatrixXd pred;  // nt x nx
};

Field assemble_field(const RunRecord& rec, ReferenceCache& cache,
                     const NetworkParams& params) {
  const PdeSpec spec = pde_spec(rec.config.pde);
  Field field;
  bool first = true;
  for (Segment seg : {Segment::Train, Segment::Validation, Segment::Test}) {
    const EvalGrid grid = build_eval_grid(spec, seg);
    const ReferenceSolution& ref = *cache.get(rec.config.pde, seg).solution;
    if (first) {
      field.xs = grid.xs;
      first = false;
    }
    const VectorXd rv = reference_grid_vector(spec, ref);
    const VectorXd pv = predict_grid_vector(params, spec, grid);
    const auto nx = grid.xs.size();
    const auto base = static_cast<Eigen::Index>(field.ts.size());
    field.ref.conservativeResize(base + grid.ts.size(), nx);
    field.pred.conservativeResize(base + grid.ts.size(), nx);
    for (Eigen::Index it = 0; it < grid.ts.size(); ++it) {
      field.ts.push_back(grid.ts[it]);
      field.ref.row(base + it) = rv.segment(it * nx, nx).transpose();
      field.pred.row(base + it) = pv.segment(it * nx, nx).transpose();
    }
  }
  return field;
}

void svg_open(std::ostream& out, int w, int h) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
      << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
      << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
}

void svg_text(std::ostream& out, double x, double y, const std::string& s,
              int size = 12, const std::string& fill = "black") {
  out << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size
      << "\" font-family=\"sans-serif\" fill=\"" << fill << "\">" << s << "</text>\n";
}

void svg_polyline(std::ostream& out, const std::vector<std::pair<double, double>>& pts,
                  const std::string& stroke, bool dashed) {
  out << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\"";
  if (dashed) out << " stroke-dasharray=\"6,4\"";
  out << " points=\"";
  for (const auto& [x, y] : pts) out << x << "," << y << " ";
  out << "\"/>\n";
}

// One heatmap panel at (x0,y0) of size w x h, values downsampled so the SVG
// stays a reasonable size.
void heatmap_panel(std::ostream& out, const Field& field, const MatrixXd& values,
                   double vmin, double vmax, double x0, double y0, double w, double h,
                   double t_train, double t_val, const std::string& title) {
  const auto nt = static_cast<Eigen::Index>(field.ts.size());
  const auto nx = field.xs.size();
  const Eigen::Index st = std::max<Eigen::Index>(1, nt / 360);
  const Eigen::Index sx = std::max<Eigen::Index>(1, nx / 240);
  const double t_lo = 0.0, t_hi = field.ts.back();
  const double x_lo = field.xs[0], x_hi = field.xs[nx - 1];

  for (Eigen::Index it = 0; it < nt; it += st) {
    const double ta = (it == 0) ? t_lo : field.ts[it - 1];
    const double tb = field.ts[std::min(it + st - 1, nt - 1)];
    const double px = x0 + (ta - t_lo) / (t_hi - t_lo) * w;
    const double pw = (tb - ta) / (t_hi - t_lo) * w + 0.5;
    for (Eigen::Index ix = 0; ix < nx; ix += sx) {
      const Eigen::Index ix2 = std::min(ix + sx, nx - 1);
      const double py = y0 + h - (field.xs[ix2] - x_lo) / (x_hi - x_lo) * h;
      const double ph = (field.xs[ix2] - field.xs[ix]) / (x_hi - x_lo) * h + 0.5;
      const double v = (values(it, ix) - vmin) / (vmax - vmin + 1e-300);
      out << "<rect x=\"" << px << "\" y=\"" << py << "\" width=\"" << pw
          << "\" height=\"" << ph << "\" fill=\"" << color_hex(v) << "\"/>\n";
    }
  }
  for (const double tv : {t_train, t_val}) {
    const double px = x0 + (tv - t_lo) / (t_hi - t_lo) * w;
    out << "<line x1=\"" << px << "\" y1=\"" << y0 << "\" x2=\"" << px << "\" y2=\""
        << y0 + h << "\" stroke=\"white\" stroke-width=\"1.5\" stroke-dasharray=\"4,3\"/>\n";
  }
  out << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << w << "\" height=\""
      << h << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg_text(out, x0, y0 - 6, title);
  svg_text(out, x0, y0 + h + 14, "t=" + fmt(t_lo), 10);
  svg_text(out, x0 + w - 40, y0 + h + 14, "t=" + fmt(t_hi), 10);
}

std::filesystem::path heatmap_svg(const RunRecord& rec, const Field& field,
                                  const std::filesystem::path& out_dir) {
  const PdeSpec spec = pde_spec(rec.config.pde);
  const TimeSplit split = time_split(spec.final_time);
  const double vmin = std::min(field.ref.minCoeff(), field.pred.minCoeff());
  const double vmax = std::max(field.ref.maxCoeff(), field.pred.maxCoeff());

  const auto name =
      pde_name(rec.config.pde) + "-" + method_name(rec.config.method) + "-heatmap.svg";
  const auto path = out_dir / name;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("plot: cannot open " + path.string());
  svg_open(f, 980, 420);
  heatmap_panel(f, field, field.ref, vmin, vmax, 40, 40, 420, 320, split.t_train,
                split.t_val, "reference");
  heatmap_panel(f, field, field.pred, vmin, vmax, 520, 40, 420, 320, split.t_train,
                split.t_val, "prediction (" + method_name(rec.config.method) + ")");
  f << "</svg>\n";
  return path;
}

std::filesystem::path snapshot_svg(const RunRecord& rec, const Field& field,
                                   double t_request, const std::filesystem::path& out_dir) {
  // Snap to the nearest grid time.
  size_t best = 0;
  for (size_t i = 1; i < field.ts.size(); ++i)
    if (std::abs(field.ts[i] - t_request) < std::abs(field.ts[best] - t_request))
      best = i;
  const double t = field.ts[best];

  const auto name = pde_name(rec.config.pde) + "-" + method_name(rec.config.method) +
                    "-snapshot-" + fmt(t_request) + ".svg";
  const auto path = out_dir / name;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("plot: cannot open " + path.string());

  const double W = 460, H = 360, mx = 50, my = 40;
  svg_open(f, static_cast<int>(W), static_cast<int>(H));
  const auto it = static_cast<Eigen::Index>(best);
  const double vmin =
      std::min(field.ref.row(it).minCoeff(), field.pred.row(it).minCoeff());
  const double vmax =
      std::max(field.ref.row(it).maxCoeff(), field.pred.row(it).maxCoeff());
  const double pad = 0.05 * (vmax - vmin + 1e-12);
  const double lo = vmin - pad, hi = vmax + pad;

  auto to_px = [&](double x, double v) {
    const double px =
        mx + (x - field.xs[0]) / (field.xs[field.xs.size() - 1] - field.xs[0]) * (W - 2 * mx);
    const double py = H - my - (v - lo) / (hi - lo) * (H - 2 * my);
    return std::pair<double, double>(px, py);
  };
  std::vector<std::pair<double, double>> ref_pts, pred_pts;
  for (Eigen::Index ix = 0; ix < field.xs.size(); ++ix) {
    ref_pts.push_back(to_px(field.xs[ix], field.ref(it, ix)));
    pred_pts.push_back(to_px(field.xs[ix], field.pred(it, ix)));
  }
  f << "<rect x=\"" << mx << "\" y=\"" << my << "\" width=\"" << W - 2 * mx
    << "\" height=\"" << H - 2 * my << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg_polyline(f, ref_pts, "#1f4e9c", false);
  svg_polyline(f, pred_pts, "#c22727", true);
  svg_text(f, mx, my - 10,
           pde_name(rec.config.pde) + "  " + method_name(rec.config.method) +
               "  t=" + fmt(t));
  svg_text(f, mx, H - 8, "x=" + fmt(field.xs[0]), 10);
  svg_text(f, W - mx - 40, H - 8, "x=" + fmt(field.xs[field.xs.size() - 1]), 10);
  svg_text(f, 4, H - my, fmt(lo), 10);
  svg_text(f, 4, my + 10, fmt(hi), 10);
  svg_text(f, W - mx - 120, my + 16, "reference", 11, "#1f4e9c");
  svg_text(f, W - mx - 120, my + 30, "prediction", 11, "#c22727");
  f << "</svg>\n";
  return path;
}

std::filesystem::path losses_svg(const RunRecord& rec, const std::filesystem::path& out_dir) {
  std::ifstream hist(std::filesystem::path(rec.run_dir) / rec.history_csv);
  if (!hist) throw std::runtime_error("plot: missing history for " + rec.run_dir);
  std::string line;
  std::getline(hist, line);  // header
  std::vector<double> lu, lf, delta;
  while (std::getline(hist, line)) {
    std::istringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 7) continue;
    lu.push_back(std::stod(cells[1]));
    lf.push_back(std::stod(cells[2]));
    delta.push_back(std::stod(cells[4]));
  }

  const auto name =
      pde_name(rec.config.pde) + "-" + method_name(rec.config.method) + "-losses.svg";
  const auto path = out_dir / name;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("plot: cannot open " + path.string());

  const double W = 560, H = 360, mx = 50, my = 40;
  svg_open(f, static_cast<int>(W), static_cast<int>(H));
  const bool with_delta = rec.config.method == Method::PINN_D2;
  auto log_clamp = [](double v) { return std::log10(std::max(v, 1e-16)); };
  double lo = 1e300, hi = -1e300;
  auto scan = [&](const std::vector<double>& v) {
    for (double x : v) {
      lo = std::min(lo, log_clamp(x));
      hi = std::max(hi, log_clamp(x));
    }
  };
  scan(lu);
  scan(lf);
  if (with_delta) scan(delta);
  if (lu.empty()) {
    lo = -1;
    hi = 1;
  }
  hi += 0.2;
  lo -= 0.2;

  const auto n = std::max<size_t>(lu.size(), 2);
  auto curve = [&](const std::vector<double>& v) {
    std::vector<std::pair<double, double>> pts;
    for (size_t i = 0; i < v.size(); ++i)
      pts.push_back({mx + double(i) / double(n - 1) * (W - 2 * mx),
                     H - my - (log_clamp(v[i]) - lo) / (hi - lo) * (H - 2 * my)});
    return pts;
  };
  f << "<rect x=\"" << mx << "\" y=\"" << my << "\" width=\"" << W - 2 * mx
    << "\" height=\"" << H - 2 * my << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg_polyline(f, curve(lu), "#1f4e9c", false);
  svg_polyline(f, curve(lf), "#c22727", false);
  if (with_delta) svg_polyline(f, curve(delta), "#2a8f4b", true);
  svg_text(f, mx, my - 10,
           pde_name(rec.config.pde) + "  " + method_name(rec.config.method) +
               "  training curves (log10)");
  svg_text(f, W - mx - 80, my + 16, "L_u", 11, "#1f4e9c");
  svg_text(f, W - mx - 80, my + 30, "L_f", 11, "#c22727");
  if (with_delta) svg_text(f, W - mx - 80, my + 44, "delta", 11, "#2a8f4b");
  svg_text(f, 4, H - my, fmt(std::pow(10.0, lo)), 10);
  svg_text(f, 4, my + 10, fmt(std::pow(10.0, hi)), 10);
  svg_text(f, mx, H - 8, "epoch 0", 10);
  svg_text(f, W - mx - 80, H - 8, "epoch " + std::to_string(lu.size()), 10);
  f << "</svg>\n";
  return path;
}

}  // namespace

std::vector<std::filesystem::path> plot_run(const RunRecord& rec, ReferenceCache& cache,
                                            const std::vector<double>& snapshot_times,
                                            const std::filesystem::path& out_dir) {
  const auto checkpoint = std::filesystem::path(rec.run_dir) / rec.checkpoint;
  if (!std::filesystem::exists(checkpoint))
    throw std::runtime_error("plot: missing checkpoint " + checkpoint.string());
  const NetworkParams params = load_checkpoint(checkpoint);
  std::filesystem::create_directories(out_dir);

  const Field field = assemble_field(rec, cache, params);
  std::vector<std::filesystem::path> out;
  out.push_back(heatmap_svg(rec, field, out_dir));
  for (const double t : snapshot_times)
    out.push_back(snapshot_svg(rec, field, t, out_dir));
  out.push_back(losses_svg(rec, out_dir));
  return out;
}

}  // namespace dpm
