#pragma once

#include <functional>
#include <span>
#include <vector>

namespace pinn::opt {

struct LbfgsConfig {
  int memory = 50;
  int max_iters = 1000;
  double c1 = 1e-4;   // sufficient decrease
  double c2 = 0.9;    // curvature
  int max_line_search = 25;
  double grad_tol = 1e-9;   // infinity norm
  double step_tol = 1e-12;  // relative step length
};

enum class Status {
  Converged,      // gradient or step tolerance reached
  MaxIterations,
  LineSearchFailed,  // best-so-far returned
  Aborted,           // objective reported a non-finite accepted value
};

/// Objective: fills grad (same length as x) and returns f. May return a
/// non-finite value for out-of-range trial points; the line search backs
/// off, and only accepted iterates must be finite.
using Objective =
    std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Called once per accepted iterate (including iterate 0). Returning
/// false stops the run with Status::Converged.
using IterCallback =
    std::function<bool(int iter, double f, std::span<const double> x)>;

struct OptResult {
  std::vector<double> x;
  double f = 0.0;
  std::vector<double> f_history;  // accepted iterates, starting at f(x0)
  int iterations = 0;
  int evaluations = 0;
  Status status = Status::MaxIterations;
};

/// L-BFGS with two-loop recursion and a strong-Wolfe line search.
/// Falls back to backtracking steepest descent when the line search
/// fails; deterministic for identical inputs.
OptResult minimize(const Objective& fg, std::vector<double> x0,
                   const LbfgsConfig& cfg, const IterCallback& on_iter = {});

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t dim, AdamConfig cfg = {});
  /// In-place parameter update from one gradient evaluation.
  void step(std::span<double> x, std::span<const double> grad);

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

OptResult adam_minimize(const Objective& fg, std::vector<double> x0,
                        const AdamConfig& cfg, int steps);

}  // namespace pinn::opt
