#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "pinn/autodiff.hpp"
#include "pinn/network.hpp"

namespace pinn::geom {

/// Reference-domain point. Only the first dim() coordinates are used.
using Point = std::array<double, 2>;

enum class DomainKind : std::uint8_t { UnitInterval, UnitSquare };

struct ReferenceDomain {
  DomainKind kind = DomainKind::UnitSquare;
  int dim() const { return kind == DomainKind::UnitInterval ? 1 : 2; }
};

enum class Strategy : std::uint8_t { Grid, Random };

struct CollocationSet {
  std::vector<Point> interior;
  std::vector<Point> boundary;
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::Grid;
};

/// N points strictly inside the domain. Grid strategy uses cell centers
/// ((i+1/2)/k, ...); random strategy is uniform, deterministic per seed.
std::vector<Point> sample_interior(const ReferenceDomain& dom, std::size_t n,
                                   Strategy strategy, std::uint64_t seed);

/// M points exactly on the boundary (one coordinate equal to 0 or 1).
std::vector<Point> sample_boundary(const ReferenceDomain& dom, std::size_t m,
                                   Strategy strategy, std::uint64_t seed);

CollocationSet sample(const ReferenceDomain& dom, std::size_t n, std::size_t m,
                      Strategy strategy, std::uint64_t seed);

/// Differentiable map x -> y from the reference domain into R^n, emitted
/// into an autodiff context. Parametric variants (the network-backed map)
/// take their parameters as graph scalars.
class Diffeo {
 public:
  virtual ~Diffeo() = default;
  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;
  virtual std::size_t param_count() const { return 0; }
  virtual std::vector<ad::Scalar> apply(ad::Context& ctx,
                                        std::span<const ad::Scalar> x,
                                        std::span<const ad::Scalar> params = {}) const = 0;

  /// Plain double evaluation for reporting (no graph).
  std::vector<double> map_point(std::span<const double> x,
                                std::span<const double> params = {}) const;
};

/// Archimedean spiral, [0,1] -> R^2: (r(lx) sin(lx), r(lx) cos(lx)), r(t)=a t.
std::unique_ptr<Diffeo> spiral(double l, double a);

/// Patch of the unit sphere, [0,1]^2 -> R^3:
/// (sin psi cos theta, sin psi sin theta, cos psi), psi=x1+psi0, theta=x2+theta0.
std::unique_ptr<Diffeo> sphere_patch(double psi0, double theta0);

/// Deformed tube, [0,1]^2 -> R^2: (x1, (2 x2 - 1) s(x1)), s(t)=base+amp cos(freq t).
std::unique_ptr<Diffeo> tube(double amp = 0.1, double freq = 3.0 * 3.14159265358979323846,
                             double base = 0.2);

std::unique_ptr<Diffeo> identity(int m);

/// Network-backed map y = net(x). No diffeomorphism guarantee; the
/// determinant check at sampling time is the only safeguard.
std::unique_ptr<Diffeo> neural(const net::Mlp& network);

/// J_ij = d phi_i / d x_j, row-major n x m. x must be Var leaves so the
/// entries stay differentiable.
std::vector<ad::Scalar> jacobian(const Diffeo& d, ad::Context& ctx,
                                 std::span<const ad::Scalar> x,
                                 std::span<const ad::Scalar> params = {});

/// det J for square maps (m = n <= 2), as a graph scalar.
ad::Scalar jacobian_det(const Diffeo& d, ad::Context& ctx,
                        std::span<const ad::Scalar> x,
                        std::span<const ad::Scalar> params = {});

/// Reference-domain distance function: q(z) = 4 z (1 - z) per coordinate,
/// zero on the boundary and positive inside.
struct DistanceFn {
  DomainKind kind = DomainKind::UnitSquare;
  ad::Scalar operator()(ad::Context& ctx, std::span<const ad::Scalar> x) const;
  double eval(std::span<const double> x) const;
};

DistanceFn distance(const ReferenceDomain& dom);

/// Asserts det J > 0 at every interior point of a square built-in map.
/// Throws DomainError on violation.
void check_diffeomorphism(const Diffeo& d, std::span<const Point> pts,
                          std::span<const double> params = {});

}  // namespace pinn::geom
