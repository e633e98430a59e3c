#include "pinn/tape.hpp"

#include <cmath>

namespace pinn::ad {

namespace {
constexpr int L = kLanes;
}

void broadcast_constants(std::span<const Node> nodes, double* v) {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].op != Op::Const) continue;
    double* out = v + i * L;
    for (int l = 0; l < L; ++l) out[l] = nodes[i].aux;
  }
}

void forward_lanes(std::span<const Node> nodes, double* v) {
  const std::size_t n = nodes.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Node& nd = nodes[i];
    double* out = v + i * L;
    const double* a = v + std::size_t(nd.a) * L;
    const double* b = v + std::size_t(nd.b) * L;
    const double* c = v + std::size_t(nd.c) * L;
    switch (nd.op) {
      case Op::Const:
      case Op::Var:
        break;
      case Op::Add:
#pragma omp simd
        for (int l = 0; l < L; ++l) out[l] = a[l] + b[l];
        break;
      case Op::Sub:
#pragma omp simd
        for (int l = 0; l < L; ++l) out[l] = a[l] - b[l];
        break;
      case Op::Mul:
#pragma omp simd
        for (int l = 0; l < L; ++l) out[l] = a[l] * b[l];
        break;
      case Op::Div:
#pragma omp simd
        for (int l = 0; l < L; ++l) out[l] = a[l] / b[l];
        break;
      case Op::Neg:
#pragma omp simd
        for (int l = 0; l < L; ++l) out[l] = -a[l];
        break;
      case Op::Sin:
        for (int l = 0; l < L; ++l) out[l] = std::sin(a[l]);
        break;
      case Op::Cos:
        for (int l = 0; l < L; ++l) out[l] = std::cos(a[l]);
        break;
      case Op::Tanh:
        for (int l = 0; l < L; ++l) out[l] = std::tanh(a[l]);
        break;
      case Op::Exp:
        for (int l = 0; l < L; ++l) out[l] = std::exp(a[l]);
        break;
      case Op::Log:
        for (int l = 0; l < L; ++l) out[l] = std::log(a[l]);
        break;
      case Op::Sqrt:
        for (int l = 0; l < L; ++l) out[l] = std::sqrt(a[l]);
        break;
      case Op::PowC:
        for (int l = 0; l < L; ++l) out[l] = std::pow(a[l], nd.aux);
        break;
      case Op::Fma:
#pragma omp simd
        for (int l = 0; l < L; ++l) out[l] = a[l] * b[l] + c[l];
        break;
    }
  }
}

void reverse_lanes(std::span<const Node> nodes, const double* v, double* adj) {
  for (std::size_t i = nodes.size(); i-- > 0;) {
    const Node& nd = nodes[i];
    if (nd.op == Op::Const || nd.op == Op::Var) continue;
    const double* g = adj + i * L;
    bool any = false;
    for (int l = 0; l < L; ++l) any = any || g[l] != 0.0;
    if (!any) continue;

    const double* va = v + std::size_t(nd.a) * L;
    const double* vb = v + std::size_t(nd.b) * L;
    const double* vi = v + i * L;
    double* aa = adj + std::size_t(nd.a) * L;
    double* ab = adj + std::size_t(nd.b) * L;
    double* ac = adj + std::size_t(nd.c) * L;
    switch (nd.op) {
      case Op::Const:
      case Op::Var:
        break;
      case Op::Add:
#pragma omp simd
        for (int l = 0; l < L; ++l) { aa[l] += g[l]; ab[l] += g[l]; }
        break;
      case Op::Sub:
#pragma omp simd
        for (int l = 0; l < L; ++l) { aa[l] += g[l]; ab[l] -= g[l]; }
        break;
      case Op::Mul:
#pragma omp simd
        for (int l = 0; l < L; ++l) {
          aa[l] += g[l] * vb[l];
          ab[l] += g[l] * va[l];
        }
        break;
      case Op::Div:
#pragma omp simd
        for (int l = 0; l < L; ++l) {
          aa[l] += g[l] / vb[l];
          ab[l] -= g[l] * vi[l] / vb[l];
        }
        break;
      case Op::Neg:
#pragma omp simd
        for (int l = 0; l < L; ++l) aa[l] -= g[l];
        break;
      case Op::Sin:
        for (int l = 0; l < L; ++l) aa[l] += g[l] * std::cos(va[l]);
        break;
      case Op::Cos:
        for (int l = 0; l < L; ++l) aa[l] -= g[l] * std::sin(va[l]);
        break;
      case Op::Tanh:
#pragma omp simd
        for (int l = 0; l < L; ++l) aa[l] += g[l] * (1.0 - vi[l] * vi[l]);
        break;
      case Op::Exp:
#pragma omp simd
        for (int l = 0; l < L; ++l) aa[l] += g[l] * vi[l];
        break;
      case Op::Log:
#pragma omp simd
        for (int l = 0; l < L; ++l) aa[l] += g[l] / va[l];
        break;
      case Op::Sqrt:
#pragma omp simd
        for (int l = 0; l < L; ++l) aa[l] += g[l] * 0.5 / vi[l];
        break;
      case Op::PowC:
        for (int l = 0; l < L; ++l)
          aa[l] += g[l] * nd.aux * std::pow(va[l], nd.aux - 1.0);
        break;
      case Op::Fma:
#pragma omp simd
        for (int l = 0; l < L; ++l) {
          aa[l] += g[l] * vb[l];
          ab[l] += g[l] * va[l];
          ac[l] += g[l];
        }
        break;
    }
  }
}

}  // namespace pinn::ad
