#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pinn/experiments.hpp"
#include "pinn/io.hpp"
#include "pinn/pullback.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int steps = -1;
  int seeds = 1;
  std::string plot = "on";
};

std::filesystem::path default_out() {
  if (const char* env = std::getenv("PINN_OUT_DIR")) return env;
  return "out";
}

int run_experiment(pinn::exp::Experiment id, const Options& opt) {
  namespace exp = pinn::exp;
  namespace io = pinn::io;

  exp::ExperimentConfig cfg = exp::defaults_for(id);
  if (!opt.config.empty()) cfg = io::load_config(opt.config, cfg);
  if (opt.seed_set) cfg.seed = opt.seed;
  if (opt.steps >= 0) cfg.steps = opt.steps;

  std::filesystem::path base =
      opt.out.empty() ? default_out() / exp::experiment_name(id)
                      : std::filesystem::path(opt.out);
  bool plots = opt.plot != "off";

  std::vector<double> errors;
  bool any_failed = false;
  for (int k = 0; k < opt.seeds; ++k) {
    exp::ExperimentConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(k);
    std::filesystem::path dir =
        opt.seeds == 1 ? base : base / ("seed_" + std::to_string(c.seed));
    io::write_manifest(c, dir);
    auto report = exp::run(c);
    io::export_fields(report, dir, plots);
    std::cout << exp::experiment_name(id) << " seed=" << c.seed
              << " final_loss=" << report.final_loss;
    if (report.l2_error) std::cout << " l2_error=" << *report.l2_error;
    std::cout << " wall_time_s=" << report.wall_time_s << "\n";
    if (!report.ok) {
      any_failed = true;
      std::cerr << "training failed: " << report.diagnostic << "\n";
    }
    if (report.l2_error) errors.push_back(*report.l2_error);
  }
  if (opt.seeds > 1 && !errors.empty()) {
    std::vector<double> sorted = errors;
    std::sort(sorted.begin(), sorted.end());
    double median = sorted[sorted.size() / 2];
    if (sorted.size() % 2 == 0)
      median = 0.5 * (median + sorted[sorted.size() / 2 - 1]);
    std::cout << "median l2_error over " << errors.size() << " seeds: "
              << median << "\n";
  }
  return any_failed ? 1 : 0;
}

int run_selftest() {
  namespace ad = pinn::ad;
  namespace geom = pinn::geom;
  namespace pull = pinn::pull;
  namespace exp = pinn::exp;
  int failures = 0;
  auto check = [&](bool ok, const std::string& what) {
    std::cout << (ok ? "ok   " : "FAIL ") << what << "\n";
    if (!ok) ++failures;
  };

  // Identity transform: composed derivatives equal raw network derivatives.
  {
    auto net = pinn::net::init({2, 8, 1}, pinn::net::Activation::Tanh, 7);
    auto id2 = geom::identity(2);
    double worst = 0.0;
    for (double a : {0.2, 0.55, 0.83}) {
      ad::Context ctx;
      std::array<ad::Scalar, 2> x{ctx.variable(a), ctx.variable(1.0 - a)};
      pull::PointOps ops(ctx, pull::Mode::Transformation, net, id2.get(), x);
      for (int i = 0; i < 2; ++i)
        worst = std::max(worst,
                         std::abs(ctx.value(ops.global_grad(0, i).id()) -
                                  ctx.value(ops.local_grad(0, i).id())));
      worst = std::max(worst,
                       std::abs(ctx.value(ops.global_laplacian(0).id()) -
                                ctx.value(ops.local_laplacian(0).id())));
    }
    check(worst < 1e-12, "identity transform leaves derivatives unchanged");
  }

  // Arc-length oracle properties.
  {
    double l = 3.5 * 3.14159265358979323846, a = 0.1;
    bool zero = exp::arc_length_oracle(0.0, l, a) == 0.0;
    check(zero, "arc length starts at zero");
    bool increasing = true;
    double prev = 0.0;
    for (int i = 1; i <= 20; ++i) {
      double L = exp::arc_length_oracle(i / 20.0, l, a);
      if (L <= prev) increasing = false;
      prev = L;
    }
    check(increasing, "arc length strictly increasing");
    double worst = 0.0;
    for (int i = 1; i < 20; ++i) {
      double x = i / 20.0, h = 1e-6;
      double d = (exp::arc_length_oracle(x + h, l, a) -
                  exp::arc_length_oracle(x - h, l, a)) /
                 (2 * h);
      double lt = l * x;
      double speed = a * l * std::sqrt(1.0 + lt * lt);
      worst = std::max(worst, std::abs(d - speed) / speed);
    }
    check(worst < 1e-8, "arc length derivative matches curve speed");
  }

  // L2 error properties.
  {
    std::vector<double> u{1.0, 2.0, 3.0};
    std::vector<double> v{1.5, 2.5, 3.5};
    bool ok = exp::l2_error(u, u) == 0.0 &&
              std::abs(exp::l2_error(u, v) - 0.5) < 1e-15;
    check(ok, "rms error identities");
  }

  std::cout << (failures == 0 ? "selftest passed" : "selftest FAILED") << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PDE solver on transformed geometries"};
  app.require_subcommand(1);

  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "config file (key=value sections)");
    sub->add_option("--seed", opt.seed, "master random seed")
        ->each([&](const std::string&) { opt.seed_set = true; });
    sub->add_option("--steps", opt.steps, "optimizer iterations");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seeds", opt.seeds, "number of consecutive seeds to run")
        ->check(CLI::PositiveNumber);
    sub->add_option("--plot", opt.plot, "write SVG plots (on/off)")
        ->check(CLI::IsMember({"on", "off"}));
  };

  auto* eik = app.add_subcommand("eikonal", "distance field on the spiral");
  auto* poi = app.add_subcommand("poisson-sphere", "Poisson on a sphere patch");
  auto* sto = app.add_subcommand("stokes-tube", "Stokes flow in a deformed tube");
  auto* shp = app.add_subcommand("shape-opt", "free-boundary shape optimization");
  app.add_subcommand("selftest", "quick built-in property checks");
  for (auto* s : {eik, poi, sto, shp}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(eik))
      return run_experiment(pinn::exp::Experiment::Eikonal, opt);
    if (app.got_subcommand(poi))
      return run_experiment(pinn::exp::Experiment::PoissonSphere, opt);
    if (app.got_subcommand(sto))
      return run_experiment(pinn::exp::Experiment::StokesTube, opt);
    if (app.got_subcommand(shp))
      return run_experiment(pinn::exp::Experiment::ShapeOpt, opt);
    return run_selftest();
  } catch (const pinn::io::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
