#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "pinn/autodiff.hpp"

using namespace pinn;

namespace {

double rel_err(double got, double want) {
  double denom = std::max(1.0, std::abs(want));
  return std::abs(got - want) / denom;
}

// d2f/dx2 via two nested derive() sweeps.
double second_derivative(
    const std::function<ad::Scalar(ad::Context&, ad::Scalar)>& f, double x0) {
  ad::Context ctx;
  ad::Scalar x = ctx.variable(x0);
  ad::Scalar y = f(ctx, x);
  ad::Scalar d1 = ad::derive(y, x);
  ad::Scalar d2 = ad::derive(d1, x);
  return ctx.value(d2.id());
}

}  // namespace

TEST_CASE("elementary first derivatives match closed forms") {
  double x0 = 0.7;
  ad::Context ctx;
  ad::Scalar x = ctx.variable(x0);

  auto d = [&](ad::Scalar y) {
    return ctx.value(ad::derive(y, x).id());
  };

  CHECK(rel_err(d(sin(x)), std::cos(x0)) < 1e-14);
  CHECK(rel_err(d(cos(x)), -std::sin(x0)) < 1e-14);
  CHECK(rel_err(d(exp(x)), std::exp(x0)) < 1e-14);
  CHECK(rel_err(d(log(x)), 1.0 / x0) < 1e-14);
  CHECK(rel_err(d(sqrt(x)), 0.5 / std::sqrt(x0)) < 1e-14);
  CHECK(rel_err(d(tanh(x)), 1.0 - std::tanh(x0) * std::tanh(x0)) < 1e-14);
  CHECK(rel_err(d(pow(x, 3.0)), 3.0 * x0 * x0) < 1e-14);
  CHECK(rel_err(d(x * x), 2.0 * x0) < 1e-14);
  CHECK(rel_err(d(ctx.one() / x), -1.0 / (x0 * x0)) < 1e-14);
  CHECK(rel_err(d(-x), -1.0) < 1e-14);
}

TEST_CASE("nested second derivatives of ten closed-form functions") {
  struct Case {
    std::function<ad::Scalar(ad::Context&, ad::Scalar)> f;
    std::function<double(double)> d2;
    double x0;
  };
  std::vector<Case> cases = {
      {[](ad::Context&, ad::Scalar x) { return sin(x); },
       [](double x) { return -std::sin(x); }, 0.7},
      {[](ad::Context&, ad::Scalar x) { return cos(x); },
       [](double x) { return -std::cos(x); }, 1.3},
      {[](ad::Context&, ad::Scalar x) { return exp(x); },
       [](double x) { return std::exp(x); }, 0.4},
      {[](ad::Context&, ad::Scalar x) { return log(x); },
       [](double x) { return -1.0 / (x * x); }, 1.7},
      {[](ad::Context&, ad::Scalar x) { return sqrt(x); },
       [](double x) { return -0.25 * std::pow(x, -1.5); }, 2.2},
      {[](ad::Context&, ad::Scalar x) { return tanh(x); },
       [](double x) {
         double t = std::tanh(x);
         return -2.0 * t * (1.0 - t * t);
       },
       0.3},
      {[](ad::Context&, ad::Scalar x) { return pow(x, 5.0); },
       [](double x) { return 20.0 * std::pow(x, 3.0); }, 1.1},
      {[](ad::Context&, ad::Scalar x) { return x * sin(x); },
       [](double x) { return 2.0 * std::cos(x) - x * std::sin(x); }, 0.9},
      {[](ad::Context& c, ad::Scalar x) { return exp(x) / (c.one() + x * x); },
       [](double x) {
         // f = e^x v with v = (1+x^2)^-1: f'' = e^x (v + 2v' + v'').
         double u = std::exp(x), q = 1.0 + x * x;
         return u * (1.0 / q - 4.0 * x / (q * q) - 2.0 / (q * q) +
                     8.0 * x * x / (q * q * q));
       },
       0.6},
      {[](ad::Context&, ad::Scalar x) { return sin(exp(x)); },
       [](double x) {
         double e = std::exp(x);
         return e * std::cos(e) - e * e * std::sin(e);
       },
       0.25},
  };
  for (const auto& c : cases) {
    double got = second_derivative(c.f, c.x0);
    CHECK(rel_err(got, c.d2(c.x0)) < 1e-10);
  }
}

TEST_CASE("third-order nesting (two input orders plus parameter order)") {
  // f(x; a) = sin(a x); d2f/dx2 = -a^2 sin(a x); d/da of that is
  // -2a sin(ax) - a^2 x cos(ax).
  double x0 = 0.8, a0 = 1.4;
  ad::Context ctx;
  ad::Scalar x = ctx.variable(x0);
  ad::Scalar a = ctx.variable(a0);
  ad::Scalar y = sin(a * x);
  ad::Scalar dxx = ad::derive(ad::derive(y, x), x);
  ad::Scalar dxxa = ad::derive(dxx, a);
  double want = -2.0 * a0 * std::sin(a0 * x0) -
                a0 * a0 * x0 * std::cos(a0 * x0);
  CHECK(rel_err(ctx.value(dxxa.id()), want) < 1e-10);
}

TEST_CASE("derivative is linear in the function") {
  ad::Context ctx;
  ad::Scalar x = ctx.variable(0.37);
  ad::Scalar f = sin(x) * exp(x);
  ad::Scalar g = ctx.constant(2.5) * cos(x);
  ad::Scalar lhs = ad::derive(f + g, x);
  ad::Scalar rhs = ad::derive(f, x) + ad::derive(g, x);
  CHECK(std::abs(ctx.value(lhs.id()) - ctx.value(rhs.id())) < 1e-12);
}

TEST_CASE("reverse sweep agrees with forward derive") {
  ad::Context ctx;
  std::vector<ad::Scalar> xs{ctx.variable(0.3), ctx.variable(-0.8),
                             ctx.variable(1.9)};
  ad::Scalar y = sin(xs[0]) * xs[1] + exp(xs[2] * xs[0]) +
                 tanh(xs[1] + xs[2]);
  auto g = ad::gradient(y, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double fwd = ctx.value(ad::derive(y, xs[i]).id());
    CHECK(std::abs(g[i] - fwd) < 1e-12);
  }
}

TEST_CASE("checkpoint rollback leaves earlier values intact") {
  ad::Context ctx;
  ad::Scalar x = ctx.variable(0.5);
  ad::Scalar base = sin(x) * exp(x);
  double before = ctx.value(base.id());
  auto cp = ctx.checkpoint();
  for (int i = 0; i < 10; ++i) {
    ad::Scalar extra = tanh(base + ctx.constant(i)) * cos(x);
    (void)ad::derive(extra, x);
    ctx.rollback(cp);
  }
  CHECK(std::abs(ctx.value(base.id()) - before) < 1e-12);
  CHECK(ctx.size() == cp.nodes);
}

TEST_CASE("set_value refresh re-evaluates the same graph") {
  ad::Context ctx;
  ad::Scalar x = ctx.variable(0.2);
  ad::Scalar y = sin(x) * x;
  ad::Scalar dy = ad::derive(y, x);
  ctx.set_value(x, 1.1);
  ctx.refresh();
  CHECK(rel_err(ctx.value(y.id()), 1.1 * std::sin(1.1)) < 1e-14);
  double want = std::sin(1.1) + 1.1 * std::cos(1.1);
  CHECK(rel_err(ctx.value(dy.id()), want) < 1e-14);
}

TEST_CASE("domain errors are reported eagerly") {
  ad::Context ctx;
  ad::Scalar z = ctx.variable(0.0);
  ad::Scalar neg = ctx.variable(-1.0);
  CHECK_THROWS_AS(ctx.one() / z, ad::DomainError);
  CHECK_THROWS_AS(log(z), ad::DomainError);
  CHECK_THROWS_AS(log(neg), ad::DomainError);
  CHECK_THROWS_AS(sqrt(neg), ad::DomainError);
  CHECK_THROWS_AS(pow(neg, 0.5), ad::DomainError);
}

TEST_CASE("finite differences corroborate the product-rule graph") {
  // Independent oracle: central differences, h = 1e-6, on f = sin(x)cos(x).
  double x0 = 0.7, h = 1e-6;
  auto f = [](double x) { return std::sin(x) * std::cos(x); };
  double fd1 = (f(x0 + h) - f(x0 - h)) / (2 * h);
  double fd2 = (f(x0 + h) - 2 * f(x0) + f(x0 - h)) / (h * h);

  ad::Context ctx;
  ad::Scalar x = ctx.variable(x0);
  ad::Scalar y = sin(x) * cos(x);
  ad::Scalar d1 = ad::derive(y, x);
  ad::Scalar d2 = ad::derive(d1, x);
  CHECK(std::abs(ctx.value(d1.id()) - fd1) < 1e-9);
  CHECK(std::abs(ctx.value(d2.id()) - fd2) < 1e-3);
}

TEST_CASE("fma node value and derivatives") {
  ad::Context ctx;
  ad::Scalar a = ctx.variable(1.7), b = ctx.variable(-0.4),
             c = ctx.variable(2.2);
  ad::Scalar y = ad::fma(a, b, c);
  CHECK(rel_err(ctx.value(y.id()), 1.7 * -0.4 + 2.2) < 1e-15);
  CHECK(rel_err(ctx.value(ad::derive(y, a).id()), -0.4) < 1e-15);
  CHECK(rel_err(ctx.value(ad::derive(y, b).id()), 1.7) < 1e-15);
  CHECK(rel_err(ctx.value(ad::derive(y, c).id()), 1.0) < 1e-15);
}
