#include "pinn/optimize.hpp"

#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>

namespace pinn::opt {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

struct LinePoint {
  double a = 0.0, phi = 0.0, dphi = 0.0;
};

}  // namespace

OptResult minimize(const Objective& fg, std::vector<double> x0,
                   const LbfgsConfig& cfg, const IterCallback& on_iter) {
  const std::size_t n = x0.size();
  OptResult res;
  res.x = std::move(x0);

  std::vector<double> g(n), g_new(n), xt(n), d(n), q(n);
  double f = fg(res.x, g);
  res.evaluations = 1;
  res.f = f;
  res.f_history.push_back(f);
  if (on_iter && !on_iter(0, f, res.x)) {
    res.status = Status::Converged;
    return res;
  }

  if (norm_inf(g) <= cfg.grad_tol || !std::isfinite(f)) {
    res.status = std::isfinite(f) ? Status::Converged : Status::Aborted;
    return res;
  }

  std::deque<std::vector<double>> S, Y;
  std::deque<double> rho;
  std::vector<double> alpha_buf;

  // phi(a) = f(x + a d); evaluates the full gradient at each trial.
  auto phi_eval = [&](double a, LinePoint& p, std::span<const double> dir) {
    for (std::size_t i = 0; i < n; ++i) xt[i] = res.x[i] + a * dir[i];
    p.a = a;
    p.phi = fg(xt, g_new);
    p.dphi = dot(g_new, dir);
    ++res.evaluations;
  };

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    // Two-loop recursion.
    q.assign(g.begin(), g.end());
    alpha_buf.assign(S.size(), 0.0);
    for (std::size_t i = S.size(); i-- > 0;) {
      alpha_buf[i] = rho[i] * dot(S[i], q);
      for (std::size_t j = 0; j < n; ++j) q[j] -= alpha_buf[i] * Y[i][j];
    }
    double gamma = 1.0;
    if (!S.empty()) {
      const auto& s = S.back();
      const auto& y = Y.back();
      gamma = dot(s, y) / dot(y, y);
    }
    for (std::size_t j = 0; j < n; ++j) q[j] *= gamma;
    for (std::size_t i = 0; i < S.size(); ++i) {
      double beta = rho[i] * dot(Y[i], q);
      for (std::size_t j = 0; j < n; ++j) q[j] += (alpha_buf[i] - beta) * S[i][j];
    }
    for (std::size_t j = 0; j < n; ++j) d[j] = -q[j];

    double dg = dot(d, g);
    if (!(dg < 0.0)) {  // not a descent direction: reset to steepest descent
      S.clear();
      Y.clear();
      rho.clear();
      for (std::size_t j = 0; j < n; ++j) d[j] = -g[j];
      dg = -dot(g, g);
    }

    const double phi0 = f, dphi0 = dg;
    const double armijo_slope = cfg.c1 * dphi0;
    const double wanted_curv = -cfg.c2 * dphi0;
    auto armijo_ok = [&](const LinePoint& p) {
      return std::isfinite(p.phi) && p.phi <= phi0 + p.a * armijo_slope;
    };

    bool found = false;
    LinePoint acc;

    // Strong-Wolfe bracketing + zoom (quadratic interpolation with
    // bisection safeguard).
    {
      int trials = 0;
      LinePoint lo{0.0, phi0, dphi0}, hi;
      bool bracketed = false;
      LinePoint prev = lo;
      double a = S.empty() && iter == 1
                     ? std::min(1.0, 1.0 / std::max(1e-12, norm_inf(g)))
                     : 1.0;
      while (trials < cfg.max_line_search) {
        LinePoint p;
        phi_eval(a, p, d);
        ++trials;
        if (!armijo_ok(p) || (trials > 1 && p.phi >= prev.phi)) {
          lo = prev;
          hi = p;
          bracketed = true;
          break;
        }
        if (std::abs(p.dphi) <= wanted_curv) {
          acc = p;
          found = true;
          break;
        }
        if (p.dphi >= 0.0) {
          lo = p;
          hi = prev;
          bracketed = true;
          break;
        }
        prev = p;
        a = std::min(2.0 * a, 1e20);
      }
      while (!found && bracketed && trials < cfg.max_line_search) {
        // quadratic model from (lo.phi, lo.dphi, hi.phi)
        double al = lo.a, ah = hi.a;
        double cand = std::numeric_limits<double>::quiet_NaN();
        double denom = hi.phi - lo.phi - lo.dphi * (ah - al);
        if (std::isfinite(denom) && denom > 0.0)
          cand = al - lo.dphi * (ah - al) * (ah - al) / (2.0 * denom);
        double blo = std::min(al, ah), bhi = std::max(al, ah);
        double margin = 0.1 * (bhi - blo);
        if (!std::isfinite(cand) || cand <= blo + 1e-3 * margin ||
            cand >= bhi - 1e-3 * margin)
          cand = 0.5 * (al + ah);
        LinePoint p;
        phi_eval(cand, p, d);
        ++trials;
        if (!armijo_ok(p) || p.phi >= lo.phi) {
          hi = p;
        } else {
          if (std::abs(p.dphi) <= wanted_curv) {
            acc = p;
            found = true;
            break;
          }
          if (p.dphi * (hi.a - lo.a) >= 0.0) hi = lo;
          lo = p;
        }
        if (std::abs(hi.a - lo.a) * norm_inf(d) <
            cfg.step_tol * std::max(1.0, norm2(res.x))) {
          if (lo.a > 0.0 && armijo_ok(lo)) {
            phi_eval(lo.a, acc, d);
            found = true;
          }
          break;
        }
      }
    }

    if (!found) {
      // Fallback: backtracking steepest descent.
      for (std::size_t j = 0; j < n; ++j) d[j] = -g[j];
      const double slope = -dot(g, g);
      double a = 1.0 / std::max(1.0, norm_inf(g));
      for (int t = 0; t < 40; ++t) {
        LinePoint p;
        phi_eval(a, p, d);
        if (std::isfinite(p.phi) && p.phi <= f + cfg.c1 * a * slope) {
          acc = p;
          found = true;
          break;
        }
        a *= 0.5;
      }
      if (!found) {
        res.status = Status::LineSearchFailed;
        return res;
      }
      S.clear();
      Y.clear();
      rho.clear();
    }

    // Accept the step; g_new currently holds the gradient at acc.a.
    std::vector<double> s(n), y(n);
    for (std::size_t j = 0; j < n; ++j) {
      s[j] = acc.a * d[j];
      xt[j] = res.x[j] + s[j];
      y[j] = g_new[j] - g[j];
    }
    res.x.swap(xt);
    g.swap(g_new);
    f = acc.phi;
    res.f = f;
    res.f_history.push_back(f);
    res.iterations = iter;
    if (on_iter && !on_iter(iter, f, res.x)) {
      res.status = Status::Converged;
      return res;
    }

    double sy = dot(s, y);
    if (sy > 1e-10 * norm2(s) * norm2(y)) {  // curvature damping
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
      while (static_cast<int>(S.size()) > cfg.memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }

    if (norm_inf(g) <= cfg.grad_tol) {
      res.status = Status::Converged;
      return res;
    }
    if (std::abs(acc.a) * norm2(d) <=
        cfg.step_tol * std::max(1.0, norm2(res.x))) {
      res.status = Status::Converged;
      return res;
    }
  }
  res.status = Status::MaxIterations;
  return res;
}

Adam::Adam(std::size_t dim, AdamConfig cfg)
    : cfg_(cfg), m_(dim, 0.0), v_(dim, 0.0) {}

void Adam::step(std::span<double> x, std::span<const double> grad) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (std::size_t i = 0; i < x.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    x[i] -= cfg_.lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg_.eps);
  }
}

OptResult adam_minimize(const Objective& fg, std::vector<double> x0,
                        const AdamConfig& cfg, int steps) {
  OptResult res;
  res.x = std::move(x0);
  std::vector<double> g(res.x.size());
  Adam adam(res.x.size(), cfg);
  for (int t = 0; t < steps; ++t) {
    res.f = fg(res.x, g);
    ++res.evaluations;
    res.f_history.push_back(res.f);
    if (!std::isfinite(res.f)) {
      res.status = Status::Aborted;
      return res;
    }
    adam.step(res.x, g);
    res.iterations = t + 1;
  }
  res.f = fg(res.x, g);
  ++res.evaluations;
  res.f_history.push_back(res.f);
  res.status = Status::MaxIterations;
  return res;
}

}  // namespace pinn::opt
