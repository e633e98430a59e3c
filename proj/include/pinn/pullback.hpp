#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pinn/autodiff.hpp"
#include "pinn/geometry.hpp"
#include "pinn/network.hpp"

namespace pinn::pull {

/// Manifold (m < n): operators in local coordinates through the
/// composition u ∘ phi. Transformation (m = n): operators in global
/// coordinates via the Jacobian-inverse pullback.
enum class Mode : std::uint8_t { Manifold, Transformation };

enum class Frame : std::uint8_t { Local, Global };

/// |det J| below the singularity threshold at an evaluation point.
class SingularJacobian : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Zero tangent on a curve (arc-length derivative undefined).
class DegenerateGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ScalarFn =
    std::function<ad::Scalar(ad::Context&, std::span<const ad::Scalar>)>;

/// Exact-Dirichlet output transform on the reference domain:
/// M_k = N_k * b(x) + g(x). A null b leaves the raw output; a null g
/// means zero boundary data.
struct OutputTransform {
  ScalarFn b;
  ScalarFn g;
};

struct ComposedField {
  const net::Mlp* network = nullptr;
  const geom::Diffeo* map = nullptr;
  Mode mode = Mode::Manifold;
  int output = 0;
  const OutputTransform* transform = nullptr;
};

struct DerivBundle {
  ad::Scalar value;
  std::vector<ad::Scalar> grad;
  std::vector<ad::Scalar> hess;  // row-major d x d
  Frame frame = Frame::Local;
  int d = 0;
};

/// Caching derivative workspace for one collocation point. The network
/// forward pass, Jacobian and tangents are emitted once and shared by
/// all requested operators; x must be Var leaves of ctx.
class PointOps {
 public:
  PointOps(ad::Context& ctx, Mode mode, const net::Mlp& network,
           const geom::Diffeo* map, std::span<const ad::Scalar> x,
           std::span<const ad::Scalar> net_params = {},
           std::span<const ad::Scalar> map_params = {},
           std::span<const OutputTransform> transforms = {},
           double det_guard = 1e-12, bool det_abort = true);

  ad::Context& ctx() { return ctx_; }
  int dim() const { return static_cast<int>(x_.size()); }
  int outputs() const;
  ad::Scalar x_coord(int i) const { return x_[i]; }

  /// y = phi(x) in global coordinates.
  const std::vector<ad::Scalar>& map_image();
  /// Raw network output N_k.
  ad::Scalar raw_output(int k);
  /// Transformed output M_k = N_k b + g (or N_k when no transform).
  ad::Scalar value(int k);

  ad::Scalar local_grad(int k, int i);
  ad::Scalar local_hess(int k, int i, int j);
  ad::Scalar local_laplacian(int k);

  ad::Scalar arclength_derivative(int k);

  ad::Scalar global_grad(int k, int i);
  ad::Scalar global_hess(int k, int i, int j);
  ad::Scalar global_laplacian(int k);
  ad::Scalar divergence();  // sum_i global_grad(i, i)

  /// det J(x); the singularity guard node in transformation mode.
  ad::Scalar det();

 private:
  const std::vector<ad::Scalar>& jac();
  const std::vector<ad::Scalar>& inv_jac_t();
  ad::Scalar d_local(int k, int i);   // dM_k/dx_i, cached
  ad::Scalar dg_local(int k, int i, int l);  // d(global_grad(k,i))/dx_l

  ad::Context& ctx_;
  Mode mode_;
  const net::Mlp* network_;
  const geom::Diffeo* map_;
  std::vector<ad::Scalar> x_;
  std::vector<ad::Scalar> net_params_, map_params_;
  std::span<const OutputTransform> transforms_;
  double det_guard_;
  bool det_abort_;

  std::vector<ad::Scalar> y_, raw_, values_, J_, invJT_;
  std::optional<ad::Scalar> det_;
  std::vector<ad::Scalar> dM_, gg_, dgg_;  // cached tangents, flat
  std::vector<ad::Scalar> hess_local_;
};

/// One-off wrappers over PointOps matching the per-operation contracts.
DerivBundle local_bundle(ad::Context& ctx, const ComposedField& field,
                         std::span<const ad::Scalar> x);
ad::Scalar arclength_derivative(ad::Context& ctx, const ComposedField& field,
                                std::span<const ad::Scalar> x);
std::vector<ad::Scalar> global_gradient(ad::Context& ctx,
                                        const ComposedField& field,
                                        std::span<const ad::Scalar> x);
std::vector<ad::Scalar> global_hessian_diag(ad::Context& ctx,
                                            const ComposedField& field,
                                            std::span<const ad::Scalar> x);
std::vector<ad::Scalar> global_hessian(ad::Context& ctx,
                                       const ComposedField& field,
                                       std::span<const ad::Scalar> x);
ad::Scalar global_divergence(ad::Context& ctx,
                             std::span<const ComposedField> fields,
                             std::span<const ad::Scalar> x);

/// M_k = N_k b(x) + g(x) applied to already-evaluated network outputs.
std::vector<ad::Scalar> apply_output_transform(
    ad::Context& ctx, std::span<const ad::Scalar> outputs,
    std::span<const ad::Scalar> x,
    std::span<const OutputTransform> transforms);

}  // namespace pinn::pull
