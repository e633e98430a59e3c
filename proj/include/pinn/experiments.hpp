#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pinn/geometry.hpp"
#include "pinn/loss.hpp"
#include "pinn/network.hpp"
#include "pinn/optimize.hpp"

namespace pinn::exp {

enum class Experiment : std::uint8_t {
  Eikonal,
  PoissonSphere,
  StokesTube,
  ShapeOpt,
};

const char* experiment_name(Experiment e);

/// Fully resolved run configuration. The per-experiment factories fill in
/// the published defaults; the config file / CLI only override fields.
struct ExperimentConfig {
  Experiment id = Experiment::Eikonal;

  std::vector<int> widths;      // solution network, including in/out dims
  std::vector<int> map_widths;  // trainable map (shape optimization only)

  // Geometry parameters (only the ones for `id` are consulted).
  double spiral_l = 3.5 * 3.14159265358979323846;
  double spiral_a = 0.1;
  double psi0 = 0.5;
  double theta0 = 1.0;
  double tube_amp = 0.1;
  double tube_freq = 3.0 * 3.14159265358979323846;
  double tube_base = 0.2;

  std::size_t n_interior = 1024;
  std::size_t n_boundary = 256;
  geom::Strategy strategy = geom::Strategy::Grid;

  opt::LbfgsConfig optimizer;
  int steps = 1000;
  std::uint64_t seed = 0;

  double bc_weight = 1.0;       // weak-BC weight (shape optimization)
  double corner_weight = 100.0; // corner-pin weight (shape optimization)
  int snapshot_every = 5;       // boundary-image snapshot interval
  double convergence_tol = 1e-8; // relative loss change, 3-iteration window

  int eval_grid_1d = 200; // evaluation points for 1-D L2 errors
  int eval_grid_2d = 64;  // per axis for 2-D L2 errors
};

ExperimentConfig eikonal_defaults();
ExperimentConfig poisson_defaults();
ExperimentConfig stokes_defaults();
ExperimentConfig shape_defaults();
ExperimentConfig defaults_for(Experiment e);

/// One evaluation-grid sample: reference coords, mapped coords, solution
/// component values (and the oracle value where one exists).
struct FieldSample {
  geom::Point local{};
  std::vector<double> global;
  std::vector<double> values;
  std::optional<double> oracle;
};

struct ExperimentReport {
  ExperimentConfig config;
  bool ok = false;
  std::string diagnostic;

  std::vector<loss::TrainRow> history;
  net::Mlp network;
  std::optional<net::Mlp> map_network;
  std::vector<FieldSample> fields;

  std::optional<double> l2_error;
  double final_loss = 0.0;
  double wall_time_s = 0.0;
  int evaluations = 0;

  /// Max |value - prescribed Dirichlet data| over boundary samples, for
  /// the exact-BC experiments.
  std::optional<double> max_boundary_deviation;

  // Stokes extras.
  std::vector<double> fluxes;        // cross-section flux at x1 = 0, 0.5, 1
  double max_speed = 0.0;
  geom::Point max_speed_at{};

  // Shape-optimization extras.
  std::vector<int> snapshot_steps;
  std::vector<std::vector<geom::Point>> boundary_snapshots; // mapped boundary
  std::vector<double> corner_residuals; // ||map(c) - c|| per corner
  double roundness_initial = 0.0;
  double roundness_final = 0.0;
  int guard_warnings = 0;
};

/// Arc length of the spiral from 0 to x by adaptive Simpson quadrature
/// of ||phi'(t)|| (absolute tolerance 1e-10).
double arc_length_oracle(double x, double l, double a);

/// Root-mean-square difference of two equal-length sample vectors.
double l2_error(std::span<const double> pred, std::span<const double> oracle);

ExperimentReport run_eikonal_spiral(const ExperimentConfig& cfg);
ExperimentReport run_poisson_sphere(const ExperimentConfig& cfg);
ExperimentReport run_stokes_tube(const ExperimentConfig& cfg);
ExperimentReport run_shape_optimization(const ExperimentConfig& cfg);
ExperimentReport run(const ExperimentConfig& cfg);

/// Deterministic sub-seed stream: network init, interior sampling, map
/// network init all draw from the one user seed.
std::uint64_t sub_seed(std::uint64_t master, std::uint64_t slot);

/// Fit a 2->2 map network to the identity on a coarse grid, so joint
/// shape optimization starts from (approximately) the reference square.
void prefit_identity(net::Mlp& m, int max_iters);

}  // namespace pinn::exp
