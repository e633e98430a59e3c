#include "pinn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pinn/tape.hpp"

namespace pinn::loss {

namespace {

constexpr int L = ad::kLanes;

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int thread_num() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

struct Workspace {
  std::vector<double> v, adj;
  std::uint64_t param_stamp = 0;
  bool ready = false;
};

enum TermKind { kInterior = 0, kWeakBc = 1, kCorner = 2 };

}  // namespace

struct LossKernel::Term {
  ad::Context ctx;
  std::vector<ad::Scalar> x;
  std::vector<ad::Scalar> params;
  std::vector<ad::Scalar> residuals;
  std::optional<ad::Scalar> guard;
  std::vector<geom::Point> points;
  double weight = 1.0;
  bool mean = true;
  int kind = kInterior;
  std::vector<Workspace> ws;          // per thread
  std::vector<double> chunk_grad;     // scratch: nchunks x nparams
  std::vector<double> chunk_loss;
};

void LossKernel::build_term(Term& t, int kind) {
  const PdeProblem& p = *problem_;
  const int m = p.dim();
  t.kind = kind;

  for (int i = 0; i < m; ++i) t.x.push_back(t.ctx.variable(0.5));
  t.params.reserve(nparams_);  // spans below alias the vector storage
  for (double v : p.network->params) t.params.push_back(t.ctx.variable(v));
  std::span<const ad::Scalar> net_params(t.params.data(),
                                         p.network->params.size());
  std::span<const ad::Scalar> map_params;
  if (p.map_network) {
    for (double v : p.map_network->params) t.params.push_back(t.ctx.variable(v));
    map_params = std::span<const ad::Scalar>(
        t.params.data() + p.network->params.size(), p.map_network->params.size());
  }

  pull::PointOps ops(t.ctx, p.mode, *p.network, p.map, t.x, net_params,
                     map_params, p.transforms, p.det_guard,
                     /*det_abort=*/false);

  switch (kind) {
    case kInterior:
      t.residuals = p.residual(ops);
      if (p.mode == pull::Mode::Transformation && p.map) t.guard = ops.det();
      break;
    case kWeakBc:
      for (const auto& c : p.weak_bc->components) {
        ad::Scalar v = ops.value(c.output);
        if (c.g) v = v - c.g(t.ctx, t.x);
        t.residuals.push_back(v);
      }
      t.weight = p.weak_bc->weight;
      break;
    case kCorner: {
      const auto& y = ops.map_image();
      for (std::size_t i = 0; i < y.size(); ++i)
        t.residuals.push_back(y[i] - t.x[i]);
      t.weight = p.corner_pin->weight;
      t.mean = false;
      break;
    }
  }
  t.ws.resize(max_threads());
}

LossKernel::LossKernel(const PdeProblem& problem,
                       const geom::CollocationSet& colloc)
    : problem_(&problem), colloc_(colloc) {
  nparams_ = problem.param_count();

  auto add = [&](int kind, std::vector<geom::Point> pts) {
    auto t = std::make_unique<Term>();
    t->points = std::move(pts);
    build_term(*t, kind);
    terms_.push_back(std::move(t));
  };

  add(kInterior, colloc_.interior);
  if (problem.weak_bc) add(kWeakBc, colloc_.boundary);
  if (problem.corner_pin) add(kCorner, problem.corner_pin->points);
}

LossKernel::~LossKernel() = default;

std::vector<double> LossKernel::initial_params() const {
  std::vector<double> p = problem_->network->params;
  if (problem_->map_network)
    p.insert(p.end(), problem_->map_network->params.begin(),
             problem_->map_network->params.end());
  return p;
}

std::vector<std::size_t> LossKernel::tape_sizes() const {
  std::vector<std::size_t> s;
  for (const auto& t : terms_) s.push_back(t->ctx.size());
  return s;
}

bool LossKernel::evaluate(std::span<const double> params, LossParts& parts,
                          std::span<double> grad, std::string* diag) {
  ++stamp_;
  warn_count_ = 0;
  parts = {};
  std::fill(grad.begin(), grad.end(), 0.0);

  bool failed = false;
  std::string first_fail;
  int warns = 0;

  for (auto& tp : terms_) {
    Term& t = *tp;
    const std::size_t np = t.points.size();
    const std::size_t nchunks = (np + L - 1) / L;
    const std::size_t nnodes = t.ctx.size();
    const auto nodes = t.ctx.nodes();
    t.chunk_grad.assign(nchunks * nparams_, 0.0);
    t.chunk_loss.assign(nchunks, 0.0);
    const double scale = t.weight * (t.mean ? 1.0 / double(np) : 1.0);

#pragma omp parallel for schedule(dynamic) reduction(+ : warns)
    for (std::size_t chunk = 0; chunk < nchunks; ++chunk) {
      Workspace& ws = t.ws[thread_num()];
      if (!ws.ready) {
        ws.v.assign(nnodes * L, 0.0);
        ws.adj.assign(nnodes * L, 0.0);
        ad::broadcast_constants(nodes, ws.v.data());
        ws.ready = true;
      }
      if (ws.param_stamp != stamp_) {
        for (std::size_t j = 0; j < nparams_; ++j) {
          double* row = ws.v.data() + std::size_t(t.params[j].id()) * L;
          for (int l = 0; l < L; ++l) row[l] = params[j];
        }
        ws.param_stamp = stamp_;
      }
      for (std::size_t i = 0; i < t.x.size(); ++i) {
        double* row = ws.v.data() + std::size_t(t.x[i].id()) * L;
        for (int l = 0; l < L; ++l) {
          std::size_t pi = std::min(chunk * L + l, np - 1);
          row[l] = t.points[pi][i];
        }
      }

      ad::forward_lanes(nodes, ws.v.data());

      bool chunk_bad = false;
      std::string msg;
      if (t.guard) {
        const double* dv = ws.v.data() + std::size_t(t.guard->id()) * L;
        for (int l = 0; l < L && chunk * L + l < np; ++l) {
          if (std::abs(dv[l]) < problem_->det_guard) {
            if (problem_->det_abort) {
              chunk_bad = true;
              msg = "singular jacobian (|det J| < threshold) at point " +
                    std::to_string(chunk * L + l);
            } else {
              ++warns;
            }
          }
        }
      }

      double local = 0.0;
      std::memset(ws.adj.data(), 0, ws.adj.size() * sizeof(double));
      for (const ad::Scalar& r : t.residuals) {
        const double* rv = ws.v.data() + std::size_t(r.id()) * L;
        double* ra = ws.adj.data() + std::size_t(r.id()) * L;
        for (int l = 0; l < L && chunk * L + l < np; ++l) {
          if (!std::isfinite(rv[l]) && !chunk_bad) {
            chunk_bad = true;
            msg = "non-finite residual at point " + std::to_string(chunk * L + l);
          }
          local += rv[l] * rv[l];
          ra[l] = 2.0 * scale * rv[l];
        }
      }
      t.chunk_loss[chunk] = local;

      if (chunk_bad) {
#pragma omp critical
        {
          if (!failed) {
            failed = true;
            first_fail = msg;
          }
        }
        continue;
      }

      ad::reverse_lanes(nodes, ws.v.data(), ws.adj.data());
      double* cg = t.chunk_grad.data() + chunk * nparams_;
      for (std::size_t j = 0; j < nparams_; ++j) {
        const double* row = ws.adj.data() + std::size_t(t.params[j].id()) * L;
        double s = 0.0;
        for (int l = 0; l < L; ++l) s += row[l];
        cg[j] = s;
      }
    }

    if (failed) break;

    double term_sum = 0.0;
    for (std::size_t c = 0; c < nchunks; ++c) term_sum += t.chunk_loss[c];
    const double term_value = scale * term_sum;
    if (t.kind == kInterior)
      parts.interior += term_value;
    else
      parts.boundary += term_value;
    for (std::size_t c = 0; c < nchunks; ++c) {
      const double* cg = t.chunk_grad.data() + c * nparams_;
      for (std::size_t j = 0; j < nparams_; ++j) grad[j] += cg[j];
    }
  }

  warn_count_ = warns;
  parts.total = parts.interior + parts.boundary;
  if (failed) {
    if (diag) *diag = first_fail;
    return false;
  }
  if (!std::isfinite(parts.total)) {
    if (diag) *diag = "non-finite loss value";
    return false;
  }
  return true;
}

bool LossKernel::evaluate_reference(std::span<const double> params,
                                    LossParts& parts, std::span<double> grad,
                                    std::string* diag) const {
  const PdeProblem& p = *problem_;
  parts = {};
  std::fill(grad.begin(), grad.end(), 0.0);

  for (const auto& tp : terms_) {
    const Term& t = *tp;
    const std::size_t np = t.points.size();
    const double scale = t.weight * (t.mean ? 1.0 / double(np) : 1.0);
    const int m = p.dim();

    ad::Context ctx;
    std::vector<ad::Scalar> leaves;
    leaves.reserve(nparams_);
    for (double v : params) leaves.push_back(ctx.variable(v));
    std::span<const ad::Scalar> net_params(leaves.data(),
                                           p.network->params.size());
    std::span<const ad::Scalar> map_params;
    if (p.map_network)
      map_params = std::span<const ad::Scalar>(
          leaves.data() + p.network->params.size(),
          p.map_network->params.size());

    double term_sum = 0.0;
    const ad::Checkpoint cp = ctx.checkpoint();
    for (std::size_t pi = 0; pi < np; ++pi) {
      std::vector<ad::Scalar> x;
      for (int i = 0; i < m; ++i) x.push_back(ctx.variable(t.points[pi][i]));
      pull::PointOps ops(ctx, p.mode, *p.network, p.map, x, net_params,
                         map_params, p.transforms, p.det_guard,
                         /*det_abort=*/false);
      std::vector<ad::Scalar> rs;
      try {
        switch (t.kind) {
          case kInterior:
            rs = p.residual(ops);
            if (p.mode == pull::Mode::Transformation && p.map &&
                p.det_abort &&
                std::abs(ops.det().value()) < p.det_guard)
              throw pull::SingularJacobian("singular jacobian at point " +
                                           std::to_string(pi));
            break;
          case kWeakBc:
            for (const auto& c : p.weak_bc->components) {
              ad::Scalar v = ops.value(c.output);
              if (c.g) v = v - c.g(ctx, x);
              rs.push_back(v);
            }
            break;
          case kCorner: {
            const auto& y = ops.map_image();
            for (std::size_t i = 0; i < y.size(); ++i)
              rs.push_back(y[i] - x[i]);
            break;
          }
        }
      } catch (const std::exception& e) {
        if (diag) *diag = e.what();
        return false;
      }

      ad::Scalar sq = rs[0] * rs[0];
      for (std::size_t k = 1; k < rs.size(); ++k)
        sq = ad::fma(rs[k], rs[k], sq);
      if (!std::isfinite(sq.value())) {
        if (diag)
          *diag = "non-finite residual at point " + std::to_string(pi);
        return false;
      }
      term_sum += sq.value();
      auto g = ad::gradient(sq, leaves);
      for (std::size_t j = 0; j < nparams_; ++j) grad[j] += scale * g[j];
      ctx.rollback(cp);
    }

    const double term_value = scale * term_sum;
    if (t.kind == kInterior)
      parts.interior += term_value;
    else
      parts.boundary += term_value;
  }
  parts.total = parts.interior + parts.boundary;
  return std::isfinite(parts.total);
}

namespace {

ad::Scalar mean_square_residuals(
    ad::Context& ctx, const PdeProblem& p,
    std::span<const ad::Scalar> params, std::span<const geom::Point> pts,
    int kind) {
  const int m = p.dim();
  std::span<const ad::Scalar> net_params(params.data(),
                                         p.network->params.size());
  std::span<const ad::Scalar> map_params;
  if (p.map_network)
    map_params = std::span<const ad::Scalar>(
        params.data() + p.network->params.size(), p.map_network->params.size());

  ad::Scalar acc;
  for (const geom::Point& pt : pts) {
    std::vector<ad::Scalar> x;
    for (int i = 0; i < m; ++i) x.push_back(ctx.variable(pt[i]));
    pull::PointOps ops(ctx, p.mode, *p.network, p.map, x, net_params,
                       map_params, p.transforms, p.det_guard, p.det_abort);
    std::vector<ad::Scalar> rs;
    if (kind == kInterior) {
      rs = p.residual(ops);
    } else {
      for (const auto& c : p.weak_bc->components) {
        ad::Scalar v = ops.value(c.output);
        if (c.g) v = v - c.g(ctx, x);
        rs.push_back(v);
      }
    }
    ad::Scalar sq = rs[0] * rs[0];
    for (std::size_t k = 1; k < rs.size(); ++k) sq = ad::fma(rs[k], rs[k], sq);
    acc = acc ? acc + sq : sq;
  }
  return acc / double(pts.size());
}

}  // namespace

ad::Scalar interior_loss(ad::Context& ctx, const PdeProblem& problem,
                         std::span<const ad::Scalar> params,
                         std::span<const geom::Point> pts) {
  if (pts.empty()) throw std::invalid_argument("interior_loss: no points");
  return mean_square_residuals(ctx, problem, params, pts, kInterior);
}

ad::Scalar boundary_loss(ad::Context& ctx, const PdeProblem& problem,
                         std::span<const ad::Scalar> params,
                         std::span<const geom::Point> pts) {
  if (!problem.weak_bc)
    throw std::invalid_argument("boundary_loss: problem has no weak BC");
  if (pts.empty()) throw std::invalid_argument("boundary_loss: no points");
  return mean_square_residuals(ctx, problem, params, pts, kWeakBc);
}

TrainOutcome train(LossKernel& kernel, std::span<const double> x0,
                   opt::LbfgsConfig cfg, int steps) {
  TrainOutcome out;
  cfg.max_iters = steps;

  LossParts last_parts;
  std::string last_diag;

  opt::Objective objective = [&](std::span<const double> x,
                                 std::span<double> grad) {
    LossParts parts;
    std::string diag;
    if (!kernel.evaluate(x, parts, grad, &diag)) {
      last_diag = diag;
      return std::numeric_limits<double>::infinity();
    }
    last_parts = parts;
    return parts.total;
  };

  opt::IterCallback record = [&](int iter, double, std::span<const double>) {
    out.history.push_back(
        {iter, last_parts.total, last_parts.interior, last_parts.boundary});
    return true;
  };

  if (steps == 0) {
    out.params.assign(x0.begin(), x0.end());
    std::vector<double> grad(kernel.param_count());
    LossParts parts;
    std::string diag;
    if (kernel.evaluate(x0, parts, grad, &diag)) {
      out.history.push_back({0, parts.total, parts.interior, parts.boundary});
      out.status = opt::Status::MaxIterations;
    } else {
      out.aborted = true;
      out.diagnostic = diag;
      out.status = opt::Status::Aborted;
    }
    out.evaluations = 1;
    return out;
  }

  auto res = opt::minimize(objective, std::vector<double>(x0.begin(), x0.end()),
                           cfg, record);
  out.params = std::move(res.x);
  out.status = res.status;
  out.evaluations = res.evaluations;
  if (res.status == opt::Status::Aborted ||
      res.status == opt::Status::LineSearchFailed) {
    out.aborted = res.status == opt::Status::Aborted;
    out.diagnostic = last_diag;
  }
  return out;
}

}  // namespace pinn::loss
