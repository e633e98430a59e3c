#include "pinn/io.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pinn::io {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::filesystem::path& path, int line,
                       const std::string& msg) {
  std::ostringstream os;
  os << path.string() << ":" << line << ": " << msg;
  throw ConfigError(os.str());
}

const char* const kSections[] = {"network", "geometry", "collocation",
                                 "optimizer", "bc"};

std::string valid_keys(const std::string& section) {
  if (section.empty())
    return "steps, seed, snapshot_every, convergence_tol, eval_grid_1d, "
           "eval_grid_2d";
  if (section == "network") return "widths, map_widths";
  if (section == "geometry")
    return "spiral_l, spiral_a, psi0, theta0, tube_amp, tube_freq, tube_base";
  if (section == "collocation") return "interior, boundary, strategy";
  if (section == "optimizer")
    return "memory, c1, c2, max_line_search, grad_tol, step_tol";
  if (section == "bc") return "weight, corner_weight";
  return "";
}

double parse_double(const std::filesystem::path& path, int line,
                    const std::string& section, const std::string& key,
                    const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (const std::exception&) {
    fail(path, line,
         "expected a number for " +
             (section.empty() ? key : section + "." + key) + ", got '" + v +
             "'");
  }
}

long long parse_int(const std::filesystem::path& path, int line,
                    const std::string& section, const std::string& key,
                    const std::string& v) {
  try {
    std::size_t pos = 0;
    long long n = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return n;
  } catch (const std::exception&) {
    fail(path, line,
         "expected an integer for " +
             (section.empty() ? key : section + "." + key) + ", got '" + v +
             "'");
  }
}

std::vector<int> parse_widths(const std::filesystem::path& path, int line,
                              const std::string& section,
                              const std::string& key, std::string v) {
  // Accept both "2,128,1" and "[2,128,1]".
  if (!v.empty() && v.front() == '[' && v.back() == ']')
    v = v.substr(1, v.size() - 2);
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(
        static_cast<int>(parse_int(path, line, section, key, item)));
  }
  if (out.size() < 2)
    fail(path, line, section + "." + key + " needs at least two layer sizes");
  return out;
}

}  // namespace

exp::ExperimentConfig load_config(const std::filesystem::path& path,
                                  exp::ExperimentConfig cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());

  std::string section;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto hash = raw.find_first_of("#;");
    std::string line = trim(hash == std::string::npos ? raw
                                                      : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(path, lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (std::find(std::begin(kSections), std::end(kSections), section) ==
          std::end(kSections))
        fail(path, lineno,
             "unknown section [" + section +
                 "] (valid: network, geometry, collocation, optimizer, bc)");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(path, lineno, "expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));

    auto unknown = [&]() -> void {
      fail(path, lineno,
           "unknown key '" + key + "'" +
               (section.empty() ? "" : " in [" + section + "]") +
               " (valid: " + valid_keys(section) + ")");
    };

    if (section.empty()) {
      if (key == "steps")
        cfg.steps = static_cast<int>(parse_int(path, lineno, section, key, val));
      else if (key == "seed")
        cfg.seed = static_cast<std::uint64_t>(
            parse_int(path, lineno, section, key, val));
      else if (key == "snapshot_every")
        cfg.snapshot_every =
            static_cast<int>(parse_int(path, lineno, section, key, val));
      else if (key == "convergence_tol")
        cfg.convergence_tol = parse_double(path, lineno, section, key, val);
      else if (key == "eval_grid_1d")
        cfg.eval_grid_1d =
            static_cast<int>(parse_int(path, lineno, section, key, val));
      else if (key == "eval_grid_2d")
        cfg.eval_grid_2d =
            static_cast<int>(parse_int(path, lineno, section, key, val));
      else
        unknown();
    } else if (section == "network") {
      if (key == "widths")
        cfg.widths = parse_widths(path, lineno, section, key, val);
      else if (key == "map_widths")
        cfg.map_widths = parse_widths(path, lineno, section, key, val);
      else
        unknown();
    } else if (section == "geometry") {
      if (key == "spiral_l")
        cfg.spiral_l = parse_double(path, lineno, section, key, val);
      else if (key == "spiral_a")
        cfg.spiral_a = parse_double(path, lineno, section, key, val);
      else if (key == "psi0")
        cfg.psi0 = parse_double(path, lineno, section, key, val);
      else if (key == "theta0")
        cfg.theta0 = parse_double(path, lineno, section, key, val);
      else if (key == "tube_amp")
        cfg.tube_amp = parse_double(path, lineno, section, key, val);
      else if (key == "tube_freq")
        cfg.tube_freq = parse_double(path, lineno, section, key, val);
      else if (key == "tube_base")
        cfg.tube_base = parse_double(path, lineno, section, key, val);
      else
        unknown();
    } else if (section == "collocation") {
      if (key == "interior")
        cfg.n_interior = static_cast<std::size_t>(
            parse_int(path, lineno, section, key, val));
      else if (key == "boundary")
        cfg.n_boundary = static_cast<std::size_t>(
            parse_int(path, lineno, section, key, val));
      else if (key == "strategy") {
        if (val == "grid")
          cfg.strategy = geom::Strategy::Grid;
        else if (val == "random")
          cfg.strategy = geom::Strategy::Random;
        else
          fail(path, lineno,
               "collocation.strategy must be 'grid' or 'random', got '" + val +
                   "'");
      } else
        unknown();
    } else if (section == "optimizer") {
      if (key == "memory")
        cfg.optimizer.memory =
            static_cast<int>(parse_int(path, lineno, section, key, val));
      else if (key == "c1")
        cfg.optimizer.c1 = parse_double(path, lineno, section, key, val);
      else if (key == "c2")
        cfg.optimizer.c2 = parse_double(path, lineno, section, key, val);
      else if (key == "max_line_search")
        cfg.optimizer.max_line_search =
            static_cast<int>(parse_int(path, lineno, section, key, val));
      else if (key == "grad_tol")
        cfg.optimizer.grad_tol = parse_double(path, lineno, section, key, val);
      else if (key == "step_tol")
        cfg.optimizer.step_tol = parse_double(path, lineno, section, key, val);
      else
        unknown();
    } else if (section == "bc") {
      if (key == "weight")
        cfg.bc_weight = parse_double(path, lineno, section, key, val);
      else if (key == "corner_weight")
        cfg.corner_weight = parse_double(path, lineno, section, key, val);
      else
        unknown();
    }
  }
  return cfg;
}

std::string config_json(const exp::ExperimentConfig& cfg) {
  json j;
  j["experiment"] = exp::experiment_name(cfg.id);
  j["steps"] = cfg.steps;
  j["seed"] = cfg.seed;
  j["network"] = {{"widths", cfg.widths}, {"map_widths", cfg.map_widths}};
  j["geometry"] = {{"spiral_l", cfg.spiral_l}, {"spiral_a", cfg.spiral_a},
                   {"psi0", cfg.psi0},         {"theta0", cfg.theta0},
                   {"tube_amp", cfg.tube_amp}, {"tube_freq", cfg.tube_freq},
                   {"tube_base", cfg.tube_base}};
  j["collocation"] = {
      {"interior", cfg.n_interior},
      {"boundary", cfg.n_boundary},
      {"strategy", cfg.strategy == geom::Strategy::Grid ? "grid" : "random"}};
  j["optimizer"] = {{"memory", cfg.optimizer.memory},
                    {"c1", cfg.optimizer.c1},
                    {"c2", cfg.optimizer.c2},
                    {"max_line_search", cfg.optimizer.max_line_search},
                    {"grad_tol", cfg.optimizer.grad_tol},
                    {"step_tol", cfg.optimizer.step_tol}};
  j["bc"] = {{"weight", cfg.bc_weight}, {"corner_weight", cfg.corner_weight}};
  j["snapshot_every"] = cfg.snapshot_every;
  j["convergence_tol"] = cfg.convergence_tol;
  j["eval_grid_1d"] = cfg.eval_grid_1d;
  j["eval_grid_2d"] = cfg.eval_grid_2d;
  return j.dump(2);
}

void write_manifest(const exp::ExperimentConfig& cfg,
                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json j;
  j["experiment"] = exp::experiment_name(cfg.id);
  j["seed"] = cfg.seed;
  j["config"] = json::parse(config_json(cfg));
  j["artifacts"] = {"fields.csv", "loss.csv", "summary.json"};
  j["engine_version"] = "1.0.0";
  auto now = std::chrono::system_clock::now();
  j["timestamp_unix"] =
      std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch())
          .count();
  std::ofstream out(dir / "run_manifest.json");
  if (!out)
    throw std::runtime_error("cannot write manifest in " + dir.string());
  out << j.dump(2) << "\n";
}

namespace {

void write_fields_csv(const exp::ExperimentReport& rep,
                      const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.imbue(std::locale::classic());
  out.precision(17);

  int local_dim = rep.config.id == exp::Experiment::Eikonal ? 1 : 2;
  std::size_t global_dim = rep.fields.empty() ? 0 : rep.fields[0].global.size();
  std::size_t ncomp = rep.fields.empty() ? 0 : rep.fields[0].values.size();
  bool has_oracle =
      !rep.fields.empty() && rep.fields[0].oracle.has_value();

  for (int i = 0; i < local_dim; ++i) out << (i ? "," : "") << "x" << i + 1;
  for (std::size_t i = 0; i < global_dim; ++i) out << ",y" << i + 1;
  for (std::size_t i = 0; i < ncomp; ++i) out << ",v" << i + 1;
  if (has_oracle) out << ",oracle";
  out << "\n";

  for (const auto& s : rep.fields) {
    for (int i = 0; i < local_dim; ++i) out << (i ? "," : "") << s.local[i];
    for (double y : s.global) out << "," << y;
    for (double v : s.values) out << "," << v;
    if (has_oracle) out << "," << *s.oracle;
    out << "\n";
  }
}

void write_loss_csv(const exp::ExperimentReport& rep,
                    const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.imbue(std::locale::classic());
  out.precision(17);
  out << "step,total,interior,boundary\n";
  for (const auto& r : rep.history)
    out << r.step << "," << r.total << "," << r.interior << "," << r.boundary
        << "\n";
}

void write_summary_json(const exp::ExperimentReport& rep,
                        const std::filesystem::path& file) {
  json j;
  j["experiment"] = exp::experiment_name(rep.config.id);
  j["ok"] = rep.ok;
  j["diagnostic"] = rep.diagnostic;
  j["seed"] = rep.config.seed;
  j["steps"] = rep.config.steps;
  j["accepted_steps"] =
      rep.history.empty() ? 0 : rep.history.back().step;
  j["l2_error"] = rep.l2_error ? json(*rep.l2_error) : json(nullptr);
  j["final_loss"] = rep.final_loss;
  j["wall_time_s"] = rep.wall_time_s;
  j["evaluations"] = rep.evaluations;
  j["max_boundary_deviation"] = rep.max_boundary_deviation
                                    ? json(*rep.max_boundary_deviation)
                                    : json(nullptr);
  j["fluxes"] = rep.fluxes;
  j["max_speed"] = rep.max_speed;
  j["max_speed_at"] = {rep.max_speed_at[0], rep.max_speed_at[1]};
  j["corner_residuals"] = rep.corner_residuals;
  j["roundness_initial"] = rep.roundness_initial;
  j["roundness_final"] = rep.roundness_final;
  j["guard_warnings"] = rep.guard_warnings;
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << j.dump(2) << "\n";
}

struct Bounds {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  void add(double x, double y) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
};

/// Scatter of the mapped points colored by the first solution component.
void write_field_svg(const exp::ExperimentReport& rep,
                     const std::filesystem::path& file) {
  if (rep.fields.empty()) return;
  Bounds b;
  double vmin = 1e300, vmax = -1e300;
  for (const auto& s : rep.fields) {
    double y0 = s.global.size() > 0 ? s.global[0] : s.local[0];
    double y1 = s.global.size() > 1 ? s.global[1] : 0.0;
    b.add(y0, y1);
    if (!s.values.empty()) {
      vmin = std::min(vmin, s.values[0]);
      vmax = std::max(vmax, s.values[0]);
    }
  }
  double w = 640, h = 640, pad = 20;
  double sx = (w - 2 * pad) / std::max(1e-12, b.xmax - b.xmin);
  double sy = (h - 2 * pad) / std::max(1e-12, b.ymax - b.ymin);
  double s = std::min(sx, sy);
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.imbue(std::locale::classic());
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w
      << "' height='" << h << "'>\n";
  for (const auto& smp : rep.fields) {
    double y0 = smp.global.size() > 0 ? smp.global[0] : smp.local[0];
    double y1 = smp.global.size() > 1 ? smp.global[1] : 0.0;
    double px = pad + (y0 - b.xmin) * s;
    double py = h - pad - (y1 - b.ymin) * s;
    double t = 0.5;
    if (!smp.values.empty() && vmax > vmin)
      t = (smp.values[0] - vmin) / (vmax - vmin);
    int r = static_cast<int>(255 * t);
    int bl = static_cast<int>(255 * (1 - t));
    out << "<circle cx='" << px << "' cy='" << py << "' r='3' fill='rgb(" << r
        << ",64," << bl << ")'/>\n";
  }
  out << "</svg>\n";
}

/// Loss curve, log10 vertical scale.
void write_loss_svg(const exp::ExperimentReport& rep,
                    const std::filesystem::path& file) {
  if (rep.history.size() < 2) return;
  double lmin = 1e300, lmax = -1e300;
  for (const auto& r : rep.history) {
    double v = std::log10(std::max(r.total, 1e-300));
    lmin = std::min(lmin, v);
    lmax = std::max(lmax, v);
  }
  if (lmax <= lmin) lmax = lmin + 1;
  double w = 640, h = 400, pad = 30;
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.imbue(std::locale::classic());
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w
      << "' height='" << h << "'>\n<polyline fill='none' stroke='black' "
      << "stroke-width='1.5' points='";
  for (std::size_t i = 0; i < rep.history.size(); ++i) {
    double x = pad + (w - 2 * pad) * static_cast<double>(i) /
                         static_cast<double>(rep.history.size() - 1);
    double v = std::log10(std::max(rep.history[i].total, 1e-300));
    double y = h - pad - (h - 2 * pad) * (v - lmin) / (lmax - lmin);
    out << x << "," << y << " ";
  }
  out << "'/>\n</svg>\n";
}

}  // namespace

void export_fields(const exp::ExperimentReport& report,
                   const std::filesystem::path& dir, bool plots) {
  std::filesystem::create_directories(dir);
  write_fields_csv(report, dir / "fields.csv");
  write_loss_csv(report, dir / "loss.csv");
  write_summary_json(report, dir / "summary.json");
  if (plots) {
    write_field_svg(report, dir / "plot_field.svg");
    write_loss_svg(report, dir / "plot_loss.svg");
  }
}

}  // namespace pinn::io
