#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pinn/experiments.hpp"

using namespace pinn;

namespace {
constexpr double kPi = 3.14159265358979323846;

exp::ExperimentConfig tiny_eikonal() {
  auto c = exp::eikonal_defaults();
  c.widths = {2, 16, 16, 1};
  c.n_interior = 64;
  c.steps = 60;
  c.eval_grid_1d = 50;
  return c;
}
}  // namespace

TEST_CASE("defaults reproduce the published setup") {
  auto e = exp::eikonal_defaults();
  CHECK(e.widths == std::vector<int>{2, 128, 128, 128, 1});
  CHECK(e.steps == 1000);
  CHECK(std::abs(e.spiral_l - 3.5 * kPi) < 1e-15);
  CHECK(e.spiral_a == 0.1);

  auto p = exp::poisson_defaults();
  CHECK(p.widths == std::vector<int>{3, 128, 128, 128, 1});
  CHECK(p.psi0 == 0.5);
  CHECK(p.theta0 == 1.0);

  auto s = exp::stokes_defaults();
  CHECK(s.steps == 5000);
  CHECK(s.widths.back() == 3);

  auto sh = exp::shape_defaults();
  CHECK(sh.widths == std::vector<int>{2, 1024, 1});
  CHECK(sh.map_widths == std::vector<int>{2, 1024, 2});
  CHECK(sh.corner_weight == 100.0);
}

TEST_CASE("arc-length oracle properties") {
  double l = 3.5 * kPi, a = 0.1;
  CHECK(exp::arc_length_oracle(0.0, l, a) == 0.0);

  // Strictly increasing (positive integrand).
  double prev = 0.0;
  for (int i = 1; i <= 20; ++i) {
    double L = exp::arc_length_oracle(i / 20.0, l, a);
    CHECK(L > prev);
    prev = L;
  }

  // dL/dx equals the curve speed (finite differences on the quadrature).
  for (int i = 1; i < 20; ++i) {
    double x = i / 20.0, h = 1e-6;
    double d = (exp::arc_length_oracle(x + h, l, a) -
                exp::arc_length_oracle(x - h, l, a)) /
               (2 * h);
    double lt = l * x;
    double speed = a * l * std::sqrt(1.0 + lt * lt);
    CHECK(std::abs(d - speed) / speed < 1e-8);
  }

  // Independent oracle pin: trapezoid with 2^20 panels.
  {
    const int n = 1 << 20;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      double t = static_cast<double>(i) / n;
      double lt = l * t;
      double w = (i == 0 || i == n) ? 0.5 : 1.0;
      acc += w * a * l * std::sqrt(1.0 + lt * lt);
    }
    acc /= n;
    CHECK(std::abs(exp::arc_length_oracle(1.0, l, a) - acc) < 1e-8);
  }
  // Total length of the default spiral.
  CHECK(std::abs(exp::arc_length_oracle(1.0, l, a) - 6.2246) < 1e-3);
}

TEST_CASE("rms error identities") {
  std::vector<double> u{1, 2, 3, 4};
  CHECK(exp::l2_error(u, u) == 0.0);
  std::vector<double> v{1.25, 2.25, 3.25, 4.25};
  CHECK(std::abs(exp::l2_error(u, v) - 0.25) < 1e-15);
  CHECK_THROWS_AS(exp::l2_error(u, std::vector<double>{1.0}),
                  std::invalid_argument);

  // Cross-check against reversed accumulation order.
  std::vector<double> a, b;
  for (int i = 0; i < 101; ++i) {
    a.push_back(std::sin(0.1 * i));
    b.push_back(std::cos(0.07 * i));
  }
  double acc = 0.0;
  for (int i = 100; i >= 0; --i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  CHECK(std::abs(exp::l2_error(a, b) - std::sqrt(acc / 101)) < 1e-12);
}

TEST_CASE("sub-seed stream is deterministic and spread out") {
  CHECK(exp::sub_seed(0, 0) == exp::sub_seed(0, 0));
  CHECK(exp::sub_seed(0, 0) != exp::sub_seed(0, 1));
  CHECK(exp::sub_seed(0, 0) != exp::sub_seed(1, 0));
}

TEST_CASE("small eikonal run trains and reports a sane field") {
  auto cfg = tiny_eikonal();
  auto rep = exp::run_eikonal_spiral(cfg);
  REQUIRE(rep.ok);
  REQUIRE(rep.l2_error.has_value());
  CHECK(rep.history.size() >= 2);
  CHECK(rep.history.back().total < rep.history.front().total);
  CHECK(rep.fields.size() == 50);
  // u(0) = 0 exactly; trained max value near the full spiral length.
  CHECK(rep.fields.front().values[0] == 0.0);
  CHECK(*rep.l2_error < 0.5);
  CHECK(*rep.max_boundary_deviation == 0.0);
}

TEST_CASE("same config and seed reproduce the loss history bitwise") {
  auto cfg = tiny_eikonal();
  cfg.steps = 15;
  auto r1 = exp::run_eikonal_spiral(cfg);
  auto r2 = exp::run_eikonal_spiral(cfg);
  REQUIRE(r1.history.size() == r2.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r1.history[i].total == r2.history[i].total);
    CHECK(r1.history[i].interior == r2.history[i].interior);
    CHECK(r1.history[i].boundary == r2.history[i].boundary);
  }
}

TEST_CASE("small Poisson run keeps the boundary exact while training") {
  auto cfg = exp::poisson_defaults();
  cfg.widths = {3, 16, 16, 1};
  cfg.n_interior = 64;
  cfg.steps = 40;
  cfg.eval_grid_2d = 17;
  auto rep = exp::run_poisson_sphere(cfg);
  REQUIRE(rep.ok);
  CHECK(rep.history.back().total < rep.history.front().total);
  CHECK(*rep.max_boundary_deviation <= 1e-12);
  for (const auto& r : rep.history) CHECK(r.boundary == 0.0);
  CHECK(rep.fields.size() == 17u * 17u);
}

TEST_CASE("small shape-optimization run improves roundness") {
  auto cfg = exp::shape_defaults();
  cfg.widths = {2, 64, 1};
  cfg.map_widths = {2, 64, 2};
  cfg.n_interior = 49;
  cfg.n_boundary = 32;
  cfg.steps = 40;
  auto rep = exp::run_shape_optimization(cfg);
  REQUIRE(rep.ok);
  CHECK(rep.history.back().total < rep.history.front().total);
  REQUIRE(rep.boundary_snapshots.size() >= 2);
  CHECK(rep.corner_residuals.size() == 4);
  CHECK(rep.roundness_initial > 1.0);
  // The pre-fit starts from (nearly) the unit square: ratio about sqrt 2.
  CHECK(std::abs(rep.roundness_initial - std::sqrt(2.0)) < 0.2);
}
