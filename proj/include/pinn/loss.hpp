#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pinn/autodiff.hpp"
#include "pinn/geometry.hpp"
#include "pinn/network.hpp"
#include "pinn/optimize.hpp"
#include "pinn/pullback.hpp"

namespace pinn::loss {

/// One PDE problem on the reference domain: residual rule, output
/// transforms for exact Dirichlet data, and optional weak-BC terms.
struct PdeProblem {
  pull::Mode mode = pull::Mode::Manifold;
  const geom::Diffeo* map = nullptr;
  const net::Mlp* network = nullptr;
  /// Trainable map network (shape optimization); its parameters are
  /// appended to the flat vector after the solution network's.
  const net::Mlp* map_network = nullptr;

  std::vector<pull::OutputTransform> transforms;
  std::function<std::vector<ad::Scalar>(pull::PointOps&)> residual;

  struct BcComponent {
    int output = 0;
    pull::ScalarFn g;  // null: zero Dirichlet data
  };
  struct WeakBc {
    double weight = 1.0;
    std::vector<BcComponent> components;
  };
  std::optional<WeakBc> weak_bc;

  /// Pins map(x) = x at fixed reference points by squared penalty
  /// (summed, not averaged), folded into the boundary part of the loss.
  struct CornerPin {
    double weight = 100.0;
    std::vector<geom::Point> points;
  };
  std::optional<CornerPin> corner_pin;

  double det_guard = 1e-12;
  bool det_abort = true;

  int dim() const {
    return map ? map->input_dim() : network->input_dim();
  }
  std::size_t param_count() const {
    return network->params.size() +
           (map_network ? map_network->params.size() : 0);
  }
};

struct LossParts {
  double total = 0.0;
  double interior = 0.0;
  double boundary = 0.0;  // weak BC term + corner penalty, weighted
};

/// Batched loss/gradient evaluator. The residual graph is emitted once
/// per term with collocation coordinates as leaves; each evaluation
/// re-sweeps values and adjoints kLanes points at a time, chunks running
/// under OpenMP. Reductions are chunk-ordered, so results are bitwise
/// deterministic for a fixed configuration.
class LossKernel {
 public:
  LossKernel(const PdeProblem& problem, const geom::CollocationSet& colloc);
  ~LossKernel();

  std::size_t param_count() const { return nparams_; }
  std::vector<double> initial_params() const;

  /// Full-batch loss and parameter gradient. Returns false (with a
  /// diagnostic) on non-finite residuals or a singular-Jacobian guard.
  bool evaluate(std::span<const double> params, LossParts& parts,
                std::span<double> grad, std::string* diag = nullptr);

  /// det-guard violations seen by the last evaluate() in warn mode.
  int guard_warnings() const { return warn_count_; }

  /// Serial per-point reference of the same loss/gradient, one graph per
  /// point with checkpoint/rollback. Kept for testing and benchmarks.
  bool evaluate_reference(std::span<const double> params, LossParts& parts,
                          std::span<double> grad,
                          std::string* diag = nullptr) const;

  /// Tape sizes per term (interior first), for reporting.
  std::vector<std::size_t> tape_sizes() const;

 private:
  struct Term;
  void build_term(Term& t, int kind);

  const PdeProblem* problem_;
  geom::CollocationSet colloc_;
  std::size_t nparams_ = 0;
  std::vector<std::unique_ptr<Term>> terms_;
  std::uint64_t stamp_ = 0;
  int warn_count_ = 0;
};

/// Monolithic-graph loss assembly (single-graph serial path): mean of
/// squared residuals over the points, as one differentiable scalar.
ad::Scalar interior_loss(ad::Context& ctx, const PdeProblem& problem,
                         std::span<const ad::Scalar> params,
                         std::span<const geom::Point> pts);
ad::Scalar boundary_loss(ad::Context& ctx, const PdeProblem& problem,
                         std::span<const ad::Scalar> params,
                         std::span<const geom::Point> pts);

struct TrainRow {
  int step = 0;
  double total = 0.0, interior = 0.0, boundary = 0.0;
};

struct TrainOutcome {
  std::vector<double> params;
  std::vector<TrainRow> history;  // accepted iterates, step 0 first
  opt::Status status = opt::Status::MaxIterations;
  bool aborted = false;
  std::string diagnostic;
  int evaluations = 0;
};

/// L-BFGS training driver. Steps count outer iterations; evaluations
/// (line-search trials included) are reported separately.
TrainOutcome train(LossKernel& kernel, std::span<const double> x0,
                   opt::LbfgsConfig cfg, int steps);

}  // namespace pinn::loss
