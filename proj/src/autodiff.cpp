#include "pinn/autodiff.hpp"

#include <cmath>
#include <cstdio>
#include <string>

namespace pinn::ad {

namespace {

void require_same_context(Scalar a, Scalar b) {
  if (a.context() != b.context())
    throw std::invalid_argument("autodiff: scalars belong to different contexts");
}

bool is_leaf(Op op) { return op == Op::Const || op == Op::Var; }

}  // namespace

double Scalar::value() const { return ctx_->value(id_); }

double eval_node(const Node& n, double va, double vb, double vc) {
  switch (n.op) {
    case Op::Const: return n.aux;
    case Op::Var:   return va;  // caller passes current leaf value
    case Op::Add:   return va + vb;
    case Op::Sub:   return va - vb;
    case Op::Mul:   return va * vb;
    case Op::Div:   return va / vb;
    case Op::Neg:   return -va;
    case Op::Sin:   return std::sin(va);
    case Op::Cos:   return std::cos(va);
    case Op::Tanh:  return std::tanh(va);
    case Op::Exp:   return std::exp(va);
    case Op::Log:   return std::log(va);
    case Op::Sqrt:  return std::sqrt(va);
    case Op::PowC:  return std::pow(va, n.aux);
    case Op::Fma:   return va * vb + vc;
  }
  return 0.0;
}

Scalar Context::emit(Op op, std::uint32_t a, std::uint32_t b, std::uint32_t c,
                     double aux) {
  double va = is_leaf(op) ? aux : vals_[a];
  double vb = (op == Op::Add || op == Op::Sub || op == Op::Mul ||
               op == Op::Div || op == Op::Fma)
                  ? vals_[b]
                  : 0.0;
  double vc = op == Op::Fma ? vals_[c] : 0.0;

  switch (op) {
    case Op::Div:
      if (vb == 0.0) throw DomainError("division by zero");
      break;
    case Op::Log:
      if (va <= 0.0) throw DomainError("log of non-positive argument");
      break;
    case Op::Sqrt:
      if (va < 0.0) throw DomainError("sqrt of negative argument");
      break;
    case Op::PowC:
      if (va < 0.0 && aux != std::nearbyint(aux))
        throw DomainError("fractional power of negative base");
      if (va == 0.0 && aux < 0.0) throw DomainError("negative power of zero");
      break;
    default:
      break;
  }

  Node n{op, a, b, c, aux};
  double v = op == Op::Var ? aux : eval_node(n, va, vb, vc);
  nodes_.push_back(n);
  vals_.push_back(v);
  return Scalar(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Scalar Context::constant(double v) { return emit(Op::Const, 0, 0, 0, v); }

Scalar Context::variable(double v) { return emit(Op::Var, 0, 0, 0, v); }

Scalar Context::zero() {
  if (zero_id_ == UINT32_MAX || zero_id_ >= nodes_.size() ||
      nodes_[zero_id_].op != Op::Const || nodes_[zero_id_].aux != 0.0)
    zero_id_ = constant(0.0).id();
  return Scalar(this, zero_id_);
}

Scalar Context::one() {
  if (one_id_ == UINT32_MAX || one_id_ >= nodes_.size() ||
      nodes_[one_id_].op != Op::Const || nodes_[one_id_].aux != 1.0)
    one_id_ = constant(1.0).id();
  return Scalar(this, one_id_);
}

void Context::set_value(Scalar leaf, double v) {
  if (leaf.context() != this)
    throw std::invalid_argument("set_value: scalar from another context");
  if (nodes_[leaf.id()].op != Op::Var)
    throw std::invalid_argument("set_value: node is not a Var leaf");
  vals_[leaf.id()] = v;
}

std::size_t Context::refresh() {
  std::size_t bad = npos;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.op == Op::Var) {
      // leaf keeps its current value
    } else if (n.op == Op::Const) {
      vals_[i] = n.aux;
    } else {
      vals_[i] = eval_node(n, vals_[n.a], vals_[n.b], vals_[n.c]);
    }
    if (bad == npos && !std::isfinite(vals_[i])) bad = i;
  }
  return bad;
}

void Context::rollback(Checkpoint cp) {
  if (cp.nodes > nodes_.size())
    throw std::invalid_argument("rollback past the end of the tape");
  nodes_.resize(cp.nodes);
  vals_.resize(cp.nodes);
}

namespace {

Scalar binary(Op op, Scalar a, Scalar b) {
  require_same_context(a, b);
  return a.context()->emit(op, a.id(), b.id());
}

Scalar unary(Op op, Scalar a, double aux = 0.0) {
  return a.context()->emit(op, a.id(), 0, 0, aux);
}

}  // namespace

Scalar operator+(Scalar a, Scalar b) { return binary(Op::Add, a, b); }
Scalar operator-(Scalar a, Scalar b) { return binary(Op::Sub, a, b); }
Scalar operator*(Scalar a, Scalar b) { return binary(Op::Mul, a, b); }
Scalar operator/(Scalar a, Scalar b) { return binary(Op::Div, a, b); }
Scalar operator-(Scalar a) { return unary(Op::Neg, a); }

Scalar operator+(Scalar a, double b) { return a + a.context()->constant(b); }
Scalar operator+(double a, Scalar b) { return b.context()->constant(a) + b; }
Scalar operator-(Scalar a, double b) { return a - a.context()->constant(b); }
Scalar operator-(double a, Scalar b) { return b.context()->constant(a) - b; }
Scalar operator*(Scalar a, double b) { return a * a.context()->constant(b); }
Scalar operator*(double a, Scalar b) { return b.context()->constant(a) * b; }
Scalar operator/(Scalar a, double b) { return a / a.context()->constant(b); }
Scalar operator/(double a, Scalar b) { return b.context()->constant(a) / b; }

Scalar sin(Scalar x) { return unary(Op::Sin, x); }
Scalar cos(Scalar x) { return unary(Op::Cos, x); }
Scalar tanh(Scalar x) { return unary(Op::Tanh, x); }
Scalar exp(Scalar x) { return unary(Op::Exp, x); }
Scalar log(Scalar x) { return unary(Op::Log, x); }
Scalar sqrt(Scalar x) { return unary(Op::Sqrt, x); }
Scalar pow(Scalar x, double p) { return unary(Op::PowC, x, p); }

Scalar fma(Scalar a, Scalar b, Scalar c) {
  require_same_context(a, b);
  require_same_context(a, c);
  return a.context()->emit(Op::Fma, a.id(), b.id(), c.id());
}

namespace {

constexpr std::uint32_t kNoTangent = UINT32_MAX;

// Tangent of one node given the tangents of its operands (kNoTangent
// encodes an identically-zero tangent, so rules emit only the surviving
// chain-rule terms).
std::uint32_t tangent_of(Context& ctx, std::uint32_t id, const Node& n,
                         std::uint32_t ta, std::uint32_t tb,
                         std::uint32_t tc) {
  Scalar self(&ctx, id);
  Scalar a(&ctx, n.a), b(&ctx, n.b), c(&ctx, n.c);
  Scalar da(&ctx, ta), db(&ctx, tb), dc(&ctx, tc);
  const bool ha = ta != kNoTangent, hb = tb != kNoTangent,
             hc = tc != kNoTangent;

  switch (n.op) {
    case Op::Const:
    case Op::Var:
      return kNoTangent;
    case Op::Add:
      if (ha && hb) return (da + db).id();
      return ha ? ta : tb;
    case Op::Sub:
      if (ha && hb) return (da - db).id();
      return ha ? ta : (-db).id();
    case Op::Mul:
      if (ha && hb) return fma(da, b, a * db).id();
      return ha ? (da * b).id() : (a * db).id();
    case Op::Div:
      // d(a/b) = (da - (a/b)*db) / b
      if (ha && hb) return ((da - self * db) / b).id();
      return ha ? (da / b).id() : ((-(self * db)) / b).id();
    case Op::Neg:
      return (-da).id();
    case Op::Sin:
      return (cos(a) * da).id();
    case Op::Cos:
      return ((-sin(a)) * da).id();
    case Op::Tanh:
      return ((1.0 - self * self) * da).id();
    case Op::Exp:
      return (self * da).id();
    case Op::Log:
      return (da / a).id();
    case Op::Sqrt:
      return (da / (self + self)).id();
    case Op::PowC:
      if (n.aux == 2.0) return ((a + a) * da).id();
      return (n.aux * pow(a, n.aux - 1.0) * da).id();
    case Op::Fma: {
      // d(a*b + c) = da*b + a*db + dc
      Scalar acc = ctx.zero();
      bool have = false;
      if (hc) { acc = dc; have = true; }
      if (hb) { acc = have ? fma(a, db, acc) : a * db; have = true; }
      if (ha) { acc = have ? fma(da, b, acc) : da * b; have = true; }
      return acc.id();
    }
  }
  return kNoTangent;
}

}  // namespace

Scalar derive(Scalar output, Scalar wrt) {
  Context& ctx = *output.context();
  require_same_context(output, wrt);
  const auto nodes = ctx.nodes();
  if (nodes[wrt.id()].op != Op::Var)
    throw std::invalid_argument("derive: wrt must be a Var leaf");

  const std::uint32_t lo = wrt.id(), hi = output.id();
  if (hi < lo) return ctx.zero();

  // Restrict tangent construction to nodes on a path wrt -> output.
  std::vector<std::uint8_t> anc(hi + 1, 0);
  anc[hi] = 1;
  for (std::uint32_t i = hi; i != UINT32_MAX && i >= lo; --i) {
    if (!anc[i] || is_leaf(nodes[i].op)) continue;
    const Node& n = nodes[i];
    anc[n.a] = 1;
    if (n.op == Op::Add || n.op == Op::Sub || n.op == Op::Mul ||
        n.op == Op::Div || n.op == Op::Fma)
      anc[n.b] = 1;
    if (n.op == Op::Fma) anc[n.c] = 1;
  }

  std::vector<std::uint32_t> tan(hi + 1, kNoTangent);
  tan[lo] = ctx.one().id();
  for (std::uint32_t i = lo + 1; i <= hi; ++i) {
    // Re-fetch per iteration: tangent emission can grow (and move) the
    // node storage, so a cached span would dangle.
    const Node n = ctx.nodes()[i];
    if (!anc[i] || is_leaf(n.op)) continue;
    std::uint32_t ta = n.a <= hi ? tan[n.a] : kNoTangent;
    std::uint32_t tb = kNoTangent, tc = kNoTangent;
    if (n.op == Op::Add || n.op == Op::Sub || n.op == Op::Mul ||
        n.op == Op::Div || n.op == Op::Fma)
      tb = n.b <= hi ? tan[n.b] : kNoTangent;
    if (n.op == Op::Fma) tc = n.c <= hi ? tan[n.c] : kNoTangent;
    if (ta == kNoTangent && tb == kNoTangent && tc == kNoTangent) continue;
    tan[i] = tangent_of(ctx, i, n, ta, tb, tc);
  }
  return tan[hi] == kNoTangent ? ctx.zero() : Scalar(&ctx, tan[hi]);
}

std::vector<double> gradient(Scalar output, std::span<const Scalar> wrt) {
  Context& ctx = *output.context();
  const auto nodes = ctx.nodes();
  const auto vals = ctx.values();
  for (const Scalar& w : wrt) {
    require_same_context(output, w);
    if (nodes[w.id()].op != Op::Var)
      throw std::invalid_argument("gradient: wrt must be Var leaves");
  }

  const std::uint32_t hi = output.id();
  std::vector<double> adj(hi + 1, 0.0);
  adj[hi] = 1.0;
  for (std::uint32_t i = hi; i != UINT32_MAX; --i) {
    const double g = adj[i];
    if (g == 0.0) continue;
    const Node& n = nodes[i];
    switch (n.op) {
      case Op::Const:
      case Op::Var:
        break;
      case Op::Add:
        adj[n.a] += g;
        adj[n.b] += g;
        break;
      case Op::Sub:
        adj[n.a] += g;
        adj[n.b] -= g;
        break;
      case Op::Mul:
        adj[n.a] += g * vals[n.b];
        adj[n.b] += g * vals[n.a];
        break;
      case Op::Div:
        adj[n.a] += g / vals[n.b];
        adj[n.b] -= g * vals[i] / vals[n.b];
        break;
      case Op::Neg:
        adj[n.a] -= g;
        break;
      case Op::Sin:
        adj[n.a] += g * std::cos(vals[n.a]);
        break;
      case Op::Cos:
        adj[n.a] -= g * std::sin(vals[n.a]);
        break;
      case Op::Tanh:
        adj[n.a] += g * (1.0 - vals[i] * vals[i]);
        break;
      case Op::Exp:
        adj[n.a] += g * vals[i];
        break;
      case Op::Log:
        adj[n.a] += g / vals[n.a];
        break;
      case Op::Sqrt:
        adj[n.a] += g * 0.5 / vals[i];
        break;
      case Op::PowC:
        adj[n.a] += g * n.aux * std::pow(vals[n.a], n.aux - 1.0);
        break;
      case Op::Fma:
        adj[n.a] += g * vals[n.b];
        adj[n.b] += g * vals[n.a];
        adj[n.c] += g;
        break;
    }
  }

  std::vector<double> out(wrt.size());
  for (std::size_t k = 0; k < wrt.size(); ++k) out[k] = adj[wrt[k].id()];
  return out;
}

}  // namespace pinn::ad
