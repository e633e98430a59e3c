#pragma once

#include <cstddef>
#include <span>

#include "pinn/autodiff.hpp"

namespace pinn::ad {

/// Lane count of the batched tape evaluator. One sweep processes kLanes
/// collocation points against the same graph structure.
inline constexpr int kLanes = 8;

/// Forward value sweep over a tape, kLanes points at a time.
/// v is laid out v[id * kLanes + lane]. Var and Const rows are inputs
/// and left untouched; every other row is recomputed in tape order.
void forward_lanes(std::span<const Node> nodes, double* v);

/// Reverse adjoint sweep. adj must be zeroed except for seeded output
/// rows; on return adj holds d(seeded outputs)/d(node) per lane.
void reverse_lanes(std::span<const Node> nodes, const double* v, double* adj);

/// Fill Const rows of a lane buffer (done once per workspace).
void broadcast_constants(std::span<const Node> nodes, double* v);

}  // namespace pinn::ad
