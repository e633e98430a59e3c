#include "pinn/geometry.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace pinn::geom {

namespace {

std::vector<Point> grid_interior_1d(std::size_t n) {
  std::vector<Point> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = {(i + 0.5) / n, 0.0};
  return pts;
}

std::vector<Point> grid_interior_2d(std::size_t n) {
  // k x k cell-center grid; if n is not a perfect square, take the first
  // n points of the next larger grid.
  std::size_t k = static_cast<std::size_t>(std::sqrt(double(n)));
  if (k * k < n) ++k;
  std::vector<Point> pts;
  pts.reserve(n);
  for (std::size_t j = 0; j < k && pts.size() < n; ++j)
    for (std::size_t i = 0; i < k && pts.size() < n; ++i)
      pts.push_back({(i + 0.5) / k, (j + 0.5) / k});
  return pts;
}

}  // namespace

std::vector<Point> sample_interior(const ReferenceDomain& dom, std::size_t n,
                                   Strategy strategy, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_interior: n must be > 0");
  if (strategy == Strategy::Grid)
    return dom.dim() == 1 ? grid_interior_1d(n) : grid_interior_2d(n);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  auto draw = [&] {
    double v = dist(rng);
    while (v == 0.0) v = dist(rng);  // strictly interior
    return v;
  };
  std::vector<Point> pts(n);
  for (auto& p : pts) {
    p[0] = draw();
    p[1] = dom.dim() == 2 ? draw() : 0.0;
  }
  return pts;
}

std::vector<Point> sample_boundary(const ReferenceDomain& dom, std::size_t m,
                                   Strategy strategy, std::uint64_t seed) {
  if (m == 0) return {};  // exact-BC problems need no boundary points
  std::vector<Point> pts;
  pts.reserve(m);

  if (dom.dim() == 1) {
    for (std::size_t i = 0; i < m; ++i) pts.push_back({i % 2 ? 1.0 : 0.0, 0.0});
    return pts;
  }

  if (strategy == Strategy::Grid) {
    // Round-robin over the four edges, cell-centered along each edge.
    std::size_t per = m / 4, rest = m % 4;
    for (int e = 0; e < 4; ++e) {
      std::size_t k = per + (static_cast<std::size_t>(e) < rest ? 1 : 0);
      for (std::size_t i = 0; i < k; ++i) {
        double t = (i + 0.5) / k;
        switch (e) {
          case 0: pts.push_back({t, 0.0}); break;
          case 1: pts.push_back({1.0, t}); break;
          case 2: pts.push_back({t, 1.0}); break;
          case 3: pts.push_back({0.0, t}); break;
        }
      }
    }
    return pts;
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::uniform_int_distribution<int> edge(0, 3);
  for (std::size_t i = 0; i < m; ++i) {
    double t = dist(rng);
    switch (edge(rng)) {
      case 0: pts.push_back({t, 0.0}); break;
      case 1: pts.push_back({1.0, t}); break;
      case 2: pts.push_back({t, 1.0}); break;
      case 3: pts.push_back({0.0, t}); break;
    }
  }
  return pts;
}

CollocationSet sample(const ReferenceDomain& dom, std::size_t n, std::size_t m,
                      Strategy strategy, std::uint64_t seed) {
  CollocationSet set;
  set.seed = seed;
  set.strategy = strategy;
  set.interior = sample_interior(dom, n, strategy, seed);
  set.boundary = sample_boundary(dom, m, strategy, seed ^ 0x9e3779b97f4a7c15ull);
  return set;
}

std::vector<double> Diffeo::map_point(std::span<const double> x,
                                      std::span<const double> params) const {
  ad::Context ctx;
  std::vector<ad::Scalar> xs, ps;
  for (double v : x) xs.push_back(ctx.constant(v));
  for (double v : params) ps.push_back(ctx.constant(v));
  auto ys = apply(ctx, xs, ps);
  std::vector<double> out(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) out[i] = ys[i].value();
  return out;
}

namespace {

class Spiral final : public Diffeo {
 public:
  Spiral(double l, double a) : l_(l), a_(a) {
    if (l <= 0.0 || a <= 0.0)
      throw std::invalid_argument("spiral: l and a must be positive");
  }
  int input_dim() const override { return 1; }
  int output_dim() const override { return 2; }
  std::vector<ad::Scalar> apply(ad::Context& , std::span<const ad::Scalar> x,
                                std::span<const ad::Scalar>) const override {
    ad::Scalar t = x[0] * l_;     // angle
    ad::Scalar r = a_ * t;        // radius
    return {r * ad::sin(t), r * ad::cos(t)};
  }

 private:
  double l_, a_;
};

class SpherePatch final : public Diffeo {
 public:
  SpherePatch(double psi0, double theta0) : psi0_(psi0), theta0_(theta0) {
    constexpr double pi = 3.14159265358979323846;
    if (!(psi0 > 0.0 && psi0 + 1.0 < pi))
      throw std::invalid_argument("sphere_patch: patch must avoid the poles");
  }
  int input_dim() const override { return 2; }
  int output_dim() const override { return 3; }
  std::vector<ad::Scalar> apply(ad::Context& , std::span<const ad::Scalar> x,
                                std::span<const ad::Scalar>) const override {
    ad::Scalar psi = x[0] + psi0_;
    ad::Scalar theta = x[1] + theta0_;
    ad::Scalar sp = ad::sin(psi);
    return {sp * ad::cos(theta), sp * ad::sin(theta), ad::cos(psi)};
  }

 private:
  double psi0_, theta0_;
};

class Tube final : public Diffeo {
 public:
  Tube(double amp, double freq, double base)
      : amp_(amp), freq_(freq), base_(base) {
    if (base - std::abs(amp) <= 0.0)
      throw std::invalid_argument("tube: s(x1) must stay positive");
  }
  int input_dim() const override { return 2; }
  int output_dim() const override { return 2; }
  std::vector<ad::Scalar> apply(ad::Context& , std::span<const ad::Scalar> x,
                                std::span<const ad::Scalar>) const override {
    ad::Scalar s = base_ + amp_ * ad::cos(freq_ * x[0]);
    return {x[0], (2.0 * x[1] - 1.0) * s};
  }

 private:
  double amp_, freq_, base_;
};

class IdentityMap final : public Diffeo {
 public:
  explicit IdentityMap(int m) : m_(m) {
    if (m < 1) throw std::invalid_argument("identity: dimension must be >= 1");
  }
  int input_dim() const override { return m_; }
  int output_dim() const override { return m_; }
  std::vector<ad::Scalar> apply(ad::Context&, std::span<const ad::Scalar> x,
                                std::span<const ad::Scalar>) const override {
    return {x.begin(), x.end()};
  }

 private:
  int m_;
};

class NeuralMap final : public Diffeo {
 public:
  explicit NeuralMap(const net::Mlp& network) : net_(&network) {}
  int input_dim() const override { return net_->input_dim(); }
  int output_dim() const override { return net_->output_dim(); }
  std::size_t param_count() const override { return net_->params.size(); }
  std::vector<ad::Scalar> apply(ad::Context& ctx, std::span<const ad::Scalar> x,
                                std::span<const ad::Scalar> params) const override {
    if (!params.empty()) return net::forward(ctx, *net_, x, params);
    std::vector<ad::Scalar> ps;
    ps.reserve(net_->params.size());
    for (double p : net_->params) ps.push_back(ctx.constant(p));
    return net::forward(ctx, *net_, x, ps);
  }

 private:
  const net::Mlp* net_;
};

}  // namespace

std::unique_ptr<Diffeo> spiral(double l, double a) {
  return std::make_unique<Spiral>(l, a);
}
std::unique_ptr<Diffeo> sphere_patch(double psi0, double theta0) {
  return std::make_unique<SpherePatch>(psi0, theta0);
}
std::unique_ptr<Diffeo> tube(double amp, double freq, double base) {
  return std::make_unique<Tube>(amp, freq, base);
}
std::unique_ptr<Diffeo> identity(int m) {
  return std::make_unique<IdentityMap>(m);
}
std::unique_ptr<Diffeo> neural(const net::Mlp& network) {
  return std::make_unique<NeuralMap>(network);
}

std::vector<ad::Scalar> jacobian(const Diffeo& d, ad::Context& ctx,
                                 std::span<const ad::Scalar> x,
                                 std::span<const ad::Scalar> params) {
  const int m = d.input_dim(), n = d.output_dim();
  if (static_cast<int>(x.size()) != m)
    throw std::invalid_argument("jacobian: dimension mismatch");
  auto y = d.apply(ctx, x, params);
  std::vector<ad::Scalar> J(std::size_t(n) * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      J[std::size_t(i) * m + j] = ad::derive(y[i], x[j]);
  return J;
}

ad::Scalar jacobian_det(const Diffeo& d, ad::Context& ctx,
                        std::span<const ad::Scalar> x,
                        std::span<const ad::Scalar> params) {
  const int m = d.input_dim(), n = d.output_dim();
  if (m != n || m > 2)
    throw std::invalid_argument("jacobian_det: square maps up to 2x2 only");
  auto J = jacobian(d, ctx, x, params);
  if (m == 1) return J[0];
  return J[0] * J[3] - J[1] * J[2];
}

namespace {
ad::Scalar q_bump(ad::Scalar z) { return 4.0 * z * (1.0 - z); }
double q_bump(double z) { return 4.0 * z * (1.0 - z); }
}  // namespace

ad::Scalar DistanceFn::operator()(ad::Context& ,
                                  std::span<const ad::Scalar> x) const {
  if (kind == DomainKind::UnitInterval) return q_bump(x[0]);
  return q_bump(x[0]) * q_bump(x[1]);
}

double DistanceFn::eval(std::span<const double> x) const {
  if (kind == DomainKind::UnitInterval) return q_bump(x[0]);
  return q_bump(x[0]) * q_bump(x[1]);
}

DistanceFn distance(const ReferenceDomain& dom) { return DistanceFn{dom.kind}; }

void check_diffeomorphism(const Diffeo& d, std::span<const Point> pts,
                          std::span<const double> params) {
  if (d.input_dim() != d.output_dim()) return;  // manifold case: no det
  for (const Point& p : pts) {
    ad::Context ctx;
    std::vector<ad::Scalar> x, ps;
    for (int j = 0; j < d.input_dim(); ++j) x.push_back(ctx.variable(p[j]));
    for (double v : params) ps.push_back(ctx.constant(v));
    double det = jacobian_det(d, ctx, x, ps).value();
    if (!(det > 0.0))
      throw ad::DomainError("det J = " + std::to_string(det) +
                            " <= 0 at interior point (" + std::to_string(p[0]) +
                            ", " + std::to_string(p[1]) + ")");
  }
}

}  // namespace pinn::geom
