// Benchmark: batched (OpenMP, lane-vectorized) loss kernel against the
// serial per-point reference, on a small Poisson-style problem.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <vector>

#include "pinn/experiments.hpp"
#include "pinn/loss.hpp"
#include "pinn/pullback.hpp"

using Clock = std::chrono::steady_clock;

int main(int argc, char** argv) {
  using namespace pinn;
  std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 256;
  int reps = argc > 2 ? std::atoi(argv[2]) : 5;

  auto map = geom::sphere_patch(0.5, 1.0);
  auto network = net::init({3, 64, 64, 1}, net::Activation::Tanh, 1);

  loss::PdeProblem problem;
  problem.mode = pull::Mode::Manifold;
  problem.map = map.get();
  problem.network = &network;
  problem.transforms.push_back(
      {[](ad::Context& ctx, std::span<const ad::Scalar> x) {
         geom::DistanceFn b{geom::DomainKind::UnitSquare};
         return b(ctx, x);
       },
       nullptr});
  problem.residual = [](pull::PointOps& ops) {
    ad::Context& ctx = ops.ctx();
    double pi = 3.14159265358979323846;
    ad::Scalar f = ctx.constant(2.0 * pi * pi) *
                   sin(ctx.constant(pi) * ops.x_coord(0)) *
                   sin(ctx.constant(pi) * ops.x_coord(1));
    return std::vector<ad::Scalar>{
        ops.local_laplacian(0) * ctx.constant(-1.0) - f};
  };

  geom::ReferenceDomain dom{geom::DomainKind::UnitSquare};
  auto colloc = geom::sample(dom, n, 0, geom::Strategy::Grid, 0);
  loss::LossKernel kernel(problem, colloc);

  std::vector<double> params = kernel.initial_params();
  std::vector<double> g1(params.size()), g2(params.size());
  loss::LossParts p1, p2;

  // Warmup + correctness check.
  if (!kernel.evaluate(params, p1, g1) ||
      !kernel.evaluate_reference(params, p2, g2)) {
    std::cerr << "evaluation failed\n";
    return 1;
  }
  double gdiff = 0.0;
  for (std::size_t i = 0; i < g1.size(); ++i)
    gdiff = std::max(gdiff, std::abs(g1[i] - g2[i]));
  std::cout << "points " << n << ", params " << params.size()
            << "\nloss batched " << p1.total << " vs reference " << p2.total
            << " (|dL| = " << std::abs(p1.total - p2.total)
            << ", max |dgrad| = " << gdiff << ")\n";

  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) kernel.evaluate(params, p1, g1);
  double batched = std::chrono::duration<double>(Clock::now() - t0).count() / reps;
  t0 = Clock::now();
  for (int r = 0; r < reps; ++r) kernel.evaluate_reference(params, p2, g2);
  double serial = std::chrono::duration<double>(Clock::now() - t0).count() / reps;

  std::cout << "batched  " << batched * 1e3 << " ms/eval\n"
            << "serial   " << serial * 1e3 << " ms/eval\n"
            << "speedup  " << serial / batched << "x\n";
  return 0;
}
