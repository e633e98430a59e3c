#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace pinn::ad {

enum class Op : std::uint8_t {
  Const,
  Var,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Sin,
  Cos,
  Tanh,
  Exp,
  Log,
  Sqrt,
  PowC,  // operand ^ constant exponent (stored in aux)
  Fma,   // a * b + c
};

struct Node {
  Op op;
  std::uint32_t a = 0, b = 0, c = 0;
  double aux = 0.0;  // Const: the value; PowC: the exponent
};

/// Argument outside the domain of an elementary operation (division by
/// zero, log/sqrt of a non-positive value, fractional power of a negative).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Context;

/// Handle to one node of a context's expression graph. Cheap to copy;
/// only valid as long as the owning context is alive and the node has
/// not been rolled back.
class Scalar {
 public:
  Scalar() = default;
  Scalar(Context* ctx, std::uint32_t id) : ctx_(ctx), id_(id) {}

  double value() const;
  std::uint32_t id() const { return id_; }
  Context* context() const { return ctx_; }
  explicit operator bool() const { return ctx_ != nullptr; }

 private:
  Context* ctx_ = nullptr;
  std::uint32_t id_ = 0;
};

struct Checkpoint {
  std::size_t nodes = 0;
};

/// Append-only expression tape. Node values are evaluated eagerly at
/// construction; refresh() re-evaluates after leaf values change.
/// A context is confined to one thread.
class Context {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  Scalar constant(double v);
  Scalar variable(double v);

  /// Write a new value into a Var leaf. Cached values of dependent nodes
  /// are stale until refresh().
  void set_value(Scalar leaf, double v);

  double value(std::uint32_t id) const { return vals_[id]; }

  /// Re-evaluate all cached node values in tape order. Returns the id of
  /// the first node whose value is non-finite, or npos if all are finite.
  std::size_t refresh();

  Checkpoint checkpoint() const { return Checkpoint{nodes_.size()}; }
  void rollback(Checkpoint cp);

  std::size_t size() const { return nodes_.size(); }
  std::span<const Node> nodes() const { return nodes_; }
  std::span<const double> values() const { return vals_; }

  Scalar emit(Op op, std::uint32_t a = 0, std::uint32_t b = 0,
              std::uint32_t c = 0, double aux = 0.0);

  /// Shared constant 0 / 1 nodes (heavily used by derivative rules).
  Scalar zero();
  Scalar one();

 private:
  std::vector<Node> nodes_;
  std::vector<double> vals_;
  std::uint32_t zero_id_ = UINT32_MAX;
  std::uint32_t one_id_ = UINT32_MAX;
};

// Value of one node from its operand values. Shared by the eager
// evaluator, refresh() and the batched tape kernel.
double eval_node(const Node& n, double va, double vb, double vc);

Scalar operator+(Scalar a, Scalar b);
Scalar operator-(Scalar a, Scalar b);
Scalar operator*(Scalar a, Scalar b);
Scalar operator/(Scalar a, Scalar b);
Scalar operator-(Scalar a);

Scalar operator+(Scalar a, double b);
Scalar operator+(double a, Scalar b);
Scalar operator-(Scalar a, double b);
Scalar operator-(double a, Scalar b);
Scalar operator*(Scalar a, double b);
Scalar operator*(double a, Scalar b);
Scalar operator/(Scalar a, double b);
Scalar operator/(double a, Scalar b);

Scalar sin(Scalar x);
Scalar cos(Scalar x);
Scalar tanh(Scalar x);
Scalar exp(Scalar x);
Scalar log(Scalar x);
Scalar sqrt(Scalar x);
Scalar pow(Scalar x, double p);
Scalar fma(Scalar a, Scalar b, Scalar c);  // a*b + c

/// Symbolic derivative d(output)/d(wrt). Appends tangent nodes to the
/// same context; the result is itself differentiable, so nesting to any
/// order is a matter of calling derive() again.
Scalar derive(Scalar output, Scalar wrt);

/// All partials of a scalar output w.r.t. a set of Var leaves in one
/// numeric reverse sweep over cached values.
std::vector<double> gradient(Scalar output, std::span<const Scalar> wrt);

}  // namespace pinn::ad
