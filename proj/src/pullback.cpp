#include "pinn/pullback.hpp"

#include <cmath>
#include <string>

namespace pinn::pull {

namespace {
constexpr std::uint32_t kUnset = UINT32_MAX;

ad::Scalar unset() { return ad::Scalar(); }
bool is_set(const ad::Scalar& s) { return static_cast<bool>(s); }
}  // namespace

PointOps::PointOps(ad::Context& ctx, Mode mode, const net::Mlp& network,
                   const geom::Diffeo* map, std::span<const ad::Scalar> x,
                   std::span<const ad::Scalar> net_params,
                   std::span<const ad::Scalar> map_params,
                   std::span<const OutputTransform> transforms,
                   double det_guard, bool det_abort)
    : ctx_(ctx),
      mode_(mode),
      network_(&network),
      map_(map),
      x_(x.begin(), x.end()),
      transforms_(transforms),
      det_guard_(det_guard),
      det_abort_(det_abort) {
  if (net_params.empty()) {
    net_params_.reserve(network.params.size());
    for (double p : network.params) net_params_.push_back(ctx.constant(p));
  } else {
    net_params_.assign(net_params.begin(), net_params.end());
  }
  map_params_.assign(map_params.begin(), map_params.end());
  if (mode_ == Mode::Transformation && map_ &&
      map_->input_dim() != map_->output_dim())
    throw std::invalid_argument("transformation mode requires m = n");
}

int PointOps::outputs() const { return network_->output_dim(); }

const std::vector<ad::Scalar>& PointOps::map_image() {
  if (y_.empty()) {
    if (!map_) throw std::invalid_argument("no map attached");
    y_ = map_->apply(ctx_, x_, map_params_);
  }
  return y_;
}

ad::Scalar PointOps::raw_output(int k) {
  if (raw_.empty()) {
    std::span<const ad::Scalar> in =
        mode_ == Mode::Manifold ? std::span<const ad::Scalar>(map_image())
                                : std::span<const ad::Scalar>(x_);
    raw_ = net::forward(ctx_, *network_, in, net_params_);
  }
  return raw_[k];
}

ad::Scalar PointOps::value(int k) {
  if (values_.empty()) values_.assign(outputs(), unset());
  if (!is_set(values_[k])) {
    ad::Scalar v = raw_output(k);
    if (k < static_cast<int>(transforms_.size())) {
      const OutputTransform& t = transforms_[k];
      if (t.b) v = v * t.b(ctx_, x_);
      if (t.g) v = v + t.g(ctx_, x_);
    }
    values_[k] = v;
  }
  return values_[k];
}

const std::vector<ad::Scalar>& PointOps::jac() {
  if (J_.empty()) {
    if (!map_) throw std::invalid_argument("no map attached");
    const auto& y = map_image();
    const int n = map_->output_dim(), m = dim();
    J_.resize(std::size_t(n) * m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        J_[std::size_t(i) * m + j] = ad::derive(y[i], x_[j]);
  }
  return J_;
}

ad::Scalar PointOps::det() {
  if (!det_) {
    const auto& J = jac();
    const int m = dim();
    if (map_->output_dim() != m || m > 2)
      throw std::invalid_argument("det: square maps up to 2x2 only");
    det_ = m == 1 ? J[0] : J[0] * J[3] - J[1] * J[2];
    if (std::abs(det_->value()) < det_guard_ && det_abort_)
      throw SingularJacobian("det J = " + std::to_string(det_->value()) +
                             " below threshold");
  }
  return *det_;
}

const std::vector<ad::Scalar>& PointOps::inv_jac_t() {
  if (invJT_.empty()) {
    const auto& J = jac();
    ad::Scalar d = det();
    const int m = dim();
    invJT_.resize(std::size_t(m) * m);
    if (m == 1) {
      invJT_[0] = ctx_.one() / d;
    } else {
      // J^{-T} = 1/det [[J11, -J10], [-J01, J00]]
      invJT_[0] = J[3] / d;
      invJT_[1] = (-J[2]) / d;
      invJT_[2] = (-J[1]) / d;
      invJT_[3] = J[0] / d;
    }
  }
  return invJT_;
}

ad::Scalar PointOps::d_local(int k, int i) {
  const int m = dim(), K = outputs();
  if (dM_.empty()) dM_.assign(std::size_t(K) * m, unset());
  ad::Scalar& slot = dM_[std::size_t(k) * m + i];
  if (!is_set(slot)) slot = ad::derive(value(k), x_[i]);
  return slot;
}

ad::Scalar PointOps::local_grad(int k, int i) { return d_local(k, i); }

ad::Scalar PointOps::local_hess(int k, int i, int j) {
  const int m = dim(), K = outputs();
  if (hess_local_.empty())
    hess_local_.assign(std::size_t(K) * m * m, unset());
  ad::Scalar& slot = hess_local_[(std::size_t(k) * m + i) * m + j];
  if (!is_set(slot)) slot = ad::derive(d_local(k, i), x_[j]);
  return slot;
}

ad::Scalar PointOps::local_laplacian(int k) {
  ad::Scalar acc = local_hess(k, 0, 0);
  for (int i = 1; i < dim(); ++i) acc = acc + local_hess(k, i, i);
  return acc;
}

ad::Scalar PointOps::arclength_derivative(int k) {
  if (dim() != 1)
    throw std::invalid_argument("arclength_derivative: 1-D manifolds only");
  const auto& J = jac();
  ad::Scalar norm2 = J[0] * J[0];
  for (int i = 1; i < map_->output_dim(); ++i) norm2 = ad::fma(J[i], J[i], norm2);
  if (!(norm2.value() > 0.0))
    throw DegenerateGeometry("zero tangent: curve is degenerate here");
  return d_local(k, 0) / ad::sqrt(norm2);
}

ad::Scalar PointOps::global_grad(int k, int i) {
  const int m = dim(), K = outputs();
  if (gg_.empty()) gg_.assign(std::size_t(K) * m, unset());
  ad::Scalar& slot = gg_[std::size_t(k) * m + i];
  if (!is_set(slot)) {
    const auto& A = inv_jac_t();
    ad::Scalar acc = A[std::size_t(i) * m] * d_local(k, 0);
    for (int j = 1; j < m; ++j)
      acc = ad::fma(A[std::size_t(i) * m + j], d_local(k, j), acc);
    slot = acc;
  }
  return slot;
}

ad::Scalar PointOps::dg_local(int k, int i, int l) {
  const int m = dim(), K = outputs();
  if (dgg_.empty()) dgg_.assign(std::size_t(K) * m * m, unset());
  ad::Scalar& slot = dgg_[(std::size_t(k) * m + i) * m + l];
  if (!is_set(slot)) slot = ad::derive(global_grad(k, i), x_[l]);
  return slot;
}

ad::Scalar PointOps::global_hess(int k, int i, int j) {
  // d(g_i)/dy_j = (J^{-T} nabla_x g_i)_j; differentiating through the
  // adjugate form carries the curvature-of-map terms automatically.
  const int m = dim();
  const auto& A = inv_jac_t();
  ad::Scalar acc = A[std::size_t(j) * m] * dg_local(k, i, 0);
  for (int l = 1; l < m; ++l)
    acc = ad::fma(A[std::size_t(j) * m + l], dg_local(k, i, l), acc);
  return acc;
}

ad::Scalar PointOps::global_laplacian(int k) {
  ad::Scalar acc = global_hess(k, 0, 0);
  for (int i = 1; i < dim(); ++i) acc = acc + global_hess(k, i, i);
  return acc;
}

ad::Scalar PointOps::divergence() {
  if (outputs() < dim())
    throw std::invalid_argument("divergence: need one field per dimension");
  ad::Scalar acc = global_grad(0, 0);
  for (int i = 1; i < dim(); ++i) acc = acc + global_grad(i, i);
  return acc;
}

namespace {

PointOps make_ops(ad::Context& ctx, const ComposedField& field,
                  std::span<const ad::Scalar> x,
                  std::span<const OutputTransform> transforms) {
  return PointOps(ctx, field.mode, *field.network, field.map, x, {}, {},
                  transforms);
}

std::span<const OutputTransform> transform_span(const ComposedField& field) {
  if (!field.transform) return {};
  return {field.transform, 1};
}

}  // namespace

DerivBundle local_bundle(ad::Context& ctx, const ComposedField& field,
                         std::span<const ad::Scalar> x) {
  PointOps ops = make_ops(ctx, field, x, transform_span(field));
  const int m = ops.dim(), k = field.output;
  DerivBundle b;
  b.frame = Frame::Local;
  b.d = m;
  b.value = ops.value(k);
  for (int i = 0; i < m; ++i) b.grad.push_back(ops.local_grad(k, i));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) b.hess.push_back(ops.local_hess(k, i, j));
  return b;
}

ad::Scalar arclength_derivative(ad::Context& ctx, const ComposedField& field,
                                std::span<const ad::Scalar> x) {
  PointOps ops = make_ops(ctx, field, x, transform_span(field));
  return ops.arclength_derivative(field.output);
}

std::vector<ad::Scalar> global_gradient(ad::Context& ctx,
                                        const ComposedField& field,
                                        std::span<const ad::Scalar> x) {
  PointOps ops = make_ops(ctx, field, x, transform_span(field));
  std::vector<ad::Scalar> g;
  for (int i = 0; i < ops.dim(); ++i) g.push_back(ops.global_grad(field.output, i));
  return g;
}

std::vector<ad::Scalar> global_hessian_diag(ad::Context& ctx,
                                            const ComposedField& field,
                                            std::span<const ad::Scalar> x) {
  PointOps ops = make_ops(ctx, field, x, transform_span(field));
  std::vector<ad::Scalar> h;
  for (int i = 0; i < ops.dim(); ++i)
    h.push_back(ops.global_hess(field.output, i, i));
  return h;
}

std::vector<ad::Scalar> global_hessian(ad::Context& ctx,
                                       const ComposedField& field,
                                       std::span<const ad::Scalar> x) {
  PointOps ops = make_ops(ctx, field, x, transform_span(field));
  const int m = ops.dim();
  std::vector<ad::Scalar> h;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) h.push_back(ops.global_hess(field.output, i, j));
  return h;
}

ad::Scalar global_divergence(ad::Context& ctx,
                             std::span<const ComposedField> fields,
                             std::span<const ad::Scalar> x) {
  ad::Scalar acc;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    PointOps ops = make_ops(ctx, fields[i], x, transform_span(fields[i]));
    ad::Scalar gi = ops.global_grad(fields[i].output, static_cast<int>(i));
    acc = is_set(acc) ? acc + gi : gi;
  }
  return acc;
}

std::vector<ad::Scalar> apply_output_transform(
    ad::Context& ctx, std::span<const ad::Scalar> outputs,
    std::span<const ad::Scalar> x,
    std::span<const OutputTransform> transforms) {
  std::vector<ad::Scalar> res(outputs.begin(), outputs.end());
  for (std::size_t k = 0; k < res.size() && k < transforms.size(); ++k) {
    const OutputTransform& t = transforms[k];
    if (t.b) res[k] = res[k] * t.b(ctx, x);
    if (t.g) res[k] = res[k] + t.g(ctx, x);
  }
  return res;
}

}  // namespace pinn::pull
