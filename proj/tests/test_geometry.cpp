#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "pinn/geometry.hpp"

using namespace pinn;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> fd_jacobian(const geom::Diffeo& d,
                                std::span<const double> x) {
  const int m = d.input_dim(), n = d.output_dim();
  const double h = 1e-6;
  std::vector<double> J(std::size_t(n) * m);
  for (int j = 0; j < m; ++j) {
    std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
    xp[j] += h;
    xm[j] -= h;
    auto yp = d.map_point(xp), ym = d.map_point(xm);
    for (int i = 0; i < n; ++i) J[std::size_t(i) * m + j] = (yp[i] - ym[i]) / (2 * h);
  }
  return J;
}

std::vector<double> graph_jacobian(const geom::Diffeo& d,
                                   std::span<const double> x) {
  ad::Context ctx;
  std::vector<ad::Scalar> xs;
  for (double v : x) xs.push_back(ctx.variable(v));
  auto J = geom::jacobian(d, ctx, xs);
  std::vector<double> out;
  for (const auto& s : J) out.push_back(ctx.value(s.id()));
  return out;
}

}  // namespace

TEST_CASE("interior sampler stays strictly inside and is deterministic") {
  for (auto kind :
       {geom::DomainKind::UnitInterval, geom::DomainKind::UnitSquare}) {
    geom::ReferenceDomain dom{kind};
    for (auto strat : {geom::Strategy::Grid, geom::Strategy::Random}) {
      auto a = geom::sample_interior(dom, 64, strat, 11);
      auto b = geom::sample_interior(dom, 64, strat, 11);
      CHECK(a.size() == 64);
      CHECK(a == b);
      for (const auto& p : a)
        for (int i = 0; i < dom.dim(); ++i) {
          CHECK(p[i] > 0.0);
          CHECK(p[i] < 1.0);
        }
    }
  }
}

TEST_CASE("boundary sampler lands exactly on the boundary") {
  geom::ReferenceDomain sq{geom::DomainKind::UnitSquare};
  for (auto strat : {geom::Strategy::Grid, geom::Strategy::Random}) {
    auto pts = geom::sample_boundary(sq, 40, strat, 3);
    CHECK(pts.size() == 40);
    for (const auto& p : pts) {
      bool on = p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0;
      CHECK(on);
    }
  }
  geom::ReferenceDomain iv{geom::DomainKind::UnitInterval};
  auto pts = geom::sample_boundary(iv, 4, geom::Strategy::Grid, 0);
  std::set<double> ends;
  for (const auto& p : pts) ends.insert(p[0]);
  CHECK(ends == std::set<double>{0.0, 1.0});
}

TEST_CASE("spiral endpoints and winding") {
  double l = 3.5 * kPi, a = 0.1;
  auto s = geom::spiral(l, a);
  CHECK(s->input_dim() == 1);
  CHECK(s->output_dim() == 2);

  double x0 = 0.0;
  auto y0 = s->map_point(std::span<const double>(&x0, 1));
  CHECK(std::abs(y0[0]) < 1e-15);
  CHECK(std::abs(y0[1]) < 1e-15);

  // phi(1) = (a l sin l, a l cos l) with l = 3.5 pi: sin = -1, cos = 0.
  double x1 = 1.0;
  auto y1 = s->map_point(std::span<const double>(&x1, 1));
  CHECK(std::abs(y1[0] - (-a * l)) < 1e-12);
  CHECK(std::abs(y1[1]) < 1e-12);

  // Radius grows linearly with the parameter.
  for (double t : {0.25, 0.5, 0.75}) {
    auto y = s->map_point(std::span<const double>(&t, 1));
    CHECK(std::abs(std::hypot(y[0], y[1]) - a * l * t) < 1e-12);
  }
}

TEST_CASE("sphere patch lies on the unit sphere with tangent frame") {
  auto sp = geom::sphere_patch(0.5, 1.0);
  CHECK(sp->input_dim() == 2);
  CHECK(sp->output_dim() == 3);
  for (double u : {0.1, 0.5, 0.9}) {
    for (double v : {0.2, 0.7}) {
      std::array<double, 2> x{u, v};
      auto y = sp->map_point(x);
      double r = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
      CHECK(std::abs(r - 1.0) < 1e-12);

      // Columns of J are tangent: orthogonal to the position vector.
      auto J = graph_jacobian(*sp, x);
      for (int j = 0; j < 2; ++j) {
        double dot = 0.0;
        for (int i = 0; i < 3; ++i) dot += y[i] * J[std::size_t(i) * 2 + j];
        CHECK(std::abs(dot) < 1e-12);
      }
    }
  }
  // psi = x1 + 0.5, theta = x2 + 1 at the origin.
  std::array<double, 2> o{0.0, 0.0};
  auto y = sp->map_point(o);
  CHECK(std::abs(y[0] - std::sin(0.5) * std::cos(1.0)) < 1e-15);
  CHECK(std::abs(y[1] - std::sin(0.5) * std::sin(1.0)) < 1e-15);
  CHECK(std::abs(y[2] - std::cos(0.5)) < 1e-15);
}

TEST_CASE("sphere patch rejects poles") {
  CHECK_THROWS_AS(geom::sphere_patch(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(geom::sphere_patch(kPi, 1.0), std::invalid_argument);
}

TEST_CASE("tube determinant is twice the profile and positive") {
  auto t = geom::tube();
  for (double u : {0.0, 1.0 / 3.0, 0.8}) {
    for (double v : {0.1, 0.5, 0.9}) {
      std::array<double, 2> x{u, v};
      ad::Context ctx;
      std::array<ad::Scalar, 2> xs{ctx.variable(u), ctx.variable(v)};
      double det = ctx.value(geom::jacobian_det(*t, ctx, xs).id());
      double s = 0.2 + 0.1 * std::cos(3.0 * kPi * u);
      CHECK(std::abs(det - 2.0 * s) < 1e-12);
      CHECK(det > 0.0);
    }
  }
  CHECK_THROWS_AS(geom::tube(0.3, 3.0 * kPi, 0.2), std::invalid_argument);
}

TEST_CASE("graph Jacobians match finite differences") {
  auto sp = geom::spiral(3.5 * kPi, 0.1);
  auto sph = geom::sphere_patch(0.5, 1.0);
  auto tb = geom::tube();
  std::vector<std::pair<const geom::Diffeo*, std::vector<double>>> cases = {
      {sp.get(), {0.37}}, {sph.get(), {0.42, 0.66}}, {tb.get(), {0.3, 0.71}}};
  for (const auto& [d, x] : cases) {
    auto fd = fd_jacobian(*d, x);
    auto gr = graph_jacobian(*d, x);
    REQUIRE(fd.size() == gr.size());
    for (std::size_t i = 0; i < fd.size(); ++i)
      CHECK(std::abs(fd[i] - gr[i]) / std::max(1.0, std::abs(gr[i])) < 1e-6);
  }
}

TEST_CASE("neural map round-trips the network forward pass") {
  auto m = net::init({2, 6, 2}, net::Activation::Tanh, 21);
  auto nm = geom::neural(m);
  std::array<double, 2> x{0.3, 0.8};
  auto y1 = nm->map_point(x);
  auto y2 = net::forward_values(m, x);
  CHECK(y1 == y2);
  CHECK(nm->param_count() == m.params.size());
}

TEST_CASE("distance function vanishes on the boundary, positive inside") {
  geom::ReferenceDomain dom{geom::DomainKind::UnitSquare};
  auto b = geom::distance(dom);
  CHECK(b.eval(std::array<double, 2>{0.0, 0.5}) == 0.0);
  CHECK(b.eval(std::array<double, 2>{0.5, 1.0}) == 0.0);
  CHECK(b.eval(std::array<double, 2>{0.5, 0.5}) == 1.0);
  CHECK(b.eval(std::array<double, 2>{0.25, 0.75}) > 0.0);

  geom::ReferenceDomain iv{geom::DomainKind::UnitInterval};
  auto b1 = geom::distance(iv);
  CHECK(b1.eval(std::array<double, 1>{0.5}) == 1.0);
  CHECK(b1.eval(std::array<double, 1>{1.0}) == 0.0);
}

TEST_CASE("diffeomorphism check flags orientation flips") {
  auto t = geom::tube();
  std::vector<geom::Point> pts = {{0.2, 0.4}, {0.6, 0.7}};
  CHECK_NOTHROW(geom::check_diffeomorphism(*t, pts));

  // A neural map from random init is generally not orientation-safe;
  // build one that folds: y = (x1, -x2) has det < 0.
  net::Mlp flip;
  flip.widths = {2, 2, 2};
  flip.params.assign(net::param_count(flip.widths), 0.0);
  // W1 = I/2 (tanh ~ linear near 0), W2 chosen to flip the second axis.
  flip.params[0] = 0.5;  // W1[0][0]
  flip.params[3] = 0.5;  // W1[1][1]
  flip.params[6] = 1.0;  // W2[0][0]
  flip.params[9] = -1.0; // W2[1][1]
  auto nm = geom::neural(flip);
  CHECK_THROWS_AS(geom::check_diffeomorphism(*nm, pts), ad::DomainError);
}
