#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "adepinn/nn.hpp"

namespace adepinn {

class Tape;

/// Handle to a scalar node on a Tape. Values are computed eagerly; adjoints
/// flow on Tape::backward.
struct Expr {
  Tape* tape = nullptr;
  int idx = -1;
  double val = 0.0;

  double value() const { return val; }
  bool valid() const { return tape != nullptr; }
};

/// The derivative bundle of one network evaluation registered on a tape.
/// Entries for derivatives not requested in the mask are invalid Exprs.
struct NetOutputs {
  Expr value;
  std::array<Expr, kMaxInputDim> grad{};
  std::array<Expr, kMaxPairs> second{};

  Expr d(int k) const { return grad[k]; }
  Expr d2(int j, int k) const { return second[pair_index(j, k)]; }
};

/// Reverse-mode tape over scalar expressions whose leaves may be network
/// evaluations (value, first and second input derivatives). backward()
/// differentiates a scalar root with respect to every registered parameter
/// set, pushing adjoints through the stored network forward states. This is
/// the engine behind every loss gradient: build the loss sample as an
/// expression, then call backward with the sample's weight as seed.
///
/// Typical cycle per point: reset_nodes(); build expressions; backward(root,
/// seed); gradients accumulate in slot_grad(). One backward per cycle.
class Tape {
 public:
  Tape() { nodes_.reserve(256); }

  /// Registers a parameter-gradient accumulator of the given length.
  int add_slot(std::size_t param_count);
  std::span<const double> slot_grad(int slot) const { return slot_grads_[slot]; }
  std::span<double> slot_grad(int slot) { return slot_grads_[slot]; }
  void zero_slot_grads();

  Expr constant(double v);
  Expr leaf(double v);  // tracked input; adjoint queryable after backward

  /// Evaluates the network at x and returns tape handles for the requested
  /// outputs. slot >= 0 accumulates d(root)/d(theta) into that slot on
  /// backward; slot == -1 treats the parameters as frozen.
  NetOutputs eval_network(int slot, const ParamSet& params, std::span<const double> x,
                          const DerivMask& mask);

  /// Seeds d(root)=seed and propagates. Network parameter adjoints are added
  /// into the registered slots.
  void backward(const Expr& root, double seed = 1.0);

  /// Adjoint of any node from the most recent backward sweep.
  double adjoint(const Expr& e) const { return adj_[e.idx]; }

  /// Clears expressions and network records, keeping slot gradients.
  void reset_nodes();

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    Const, Leaf, Add, Sub, Mul, Div, Neg, Exp, Log, Sqrt, Tanh, NetOut
  };
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double val = 0.0;
  };
  struct NetRec {
    const ParamSet* params = nullptr;
    int slot = -1;
    Workspace ws;
    std::array<double, 1 + kMaxInputDim + kMaxPairs> out_adj{};
  };

  std::vector<Node> nodes_;
  std::vector<NetRec> recs_;
  std::size_t live_recs_ = 0;
  std::vector<std::vector<double>> slot_grads_;
  std::vector<double> adj_;

  Expr push(Op op, int a, int b, double val);
  friend Expr operator+(const Expr&, const Expr&);
  friend Expr operator-(const Expr&, const Expr&);
  friend Expr operator*(const Expr&, const Expr&);
  friend Expr operator/(const Expr&, const Expr&);
  friend Expr operator-(const Expr&);
  friend Expr exp(const Expr&);
  friend Expr log(const Expr&);
  friend Expr sqrt(const Expr&);
  friend Expr tanh(const Expr&);
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr exp(const Expr& a);
Expr log(const Expr& a);
Expr sqrt(const Expr& a);
Expr tanh(const Expr& a);

inline Expr operator+(const Expr& a, double c) { return a + a.tape->constant(c); }
inline Expr operator+(double c, const Expr& a) { return a.tape->constant(c) + a; }
inline Expr operator-(const Expr& a, double c) { return a - a.tape->constant(c); }
inline Expr operator-(double c, const Expr& a) { return a.tape->constant(c) - a; }
inline Expr operator*(const Expr& a, double c) { return a * a.tape->constant(c); }
inline Expr operator*(double c, const Expr& a) { return a.tape->constant(c) * a; }
inline Expr operator/(const Expr& a, double c) { return a / a.tape->constant(c); }
inline Expr operator/(double c, const Expr& a) { return a.tape->constant(c) / a; }
inline Expr sq(const Expr& a) { return a * a; }

}  // namespace adepinn
