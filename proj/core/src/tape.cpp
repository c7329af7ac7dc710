#include "adepinn/tape.hpp"

#include <cmath>

#include "adepinn/errors.hpp"

namespace adepinn {

int Tape::add_slot(std::size_t param_count) {
  slot_grads_.emplace_back(param_count, 0.0);
  return static_cast<int>(slot_grads_.size()) - 1;
}

void Tape::zero_slot_grads() {
  for (auto& g : slot_grads_) std::fill(g.begin(), g.end(), 0.0);
}

Expr Tape::push(Op op, int a, int b, double val) {
  nodes_.push_back(Node{op, a, b, val});
  return Expr{this, static_cast<int>(nodes_.size()) - 1, val};
}

Expr Tape::constant(double v) { return push(Op::Const, -1, -1, v); }
Expr Tape::leaf(double v) { return push(Op::Leaf, -1, -1, v); }

NetOutputs Tape::eval_network(int slot, const ParamSet& params, std::span<const double> x,
                              const DerivMask& mask) {
  if (slot >= static_cast<int>(slot_grads_.size()))
    throw InvalidInputError("network slot not registered on tape");
  if (slot >= 0 && slot_grads_[slot].size() != params.size())
    throw InvalidInputError("slot gradient length does not match parameter count");
  if (live_recs_ == recs_.size()) recs_.emplace_back();
  NetRec& rec = recs_[live_recs_];
  const int rec_idx = static_cast<int>(live_recs_);
  ++live_recs_;
  rec.params = &params;
  rec.slot = slot;
  rec.out_adj.fill(0.0);
  rec.ws.forward(params, x, mask);

  NetOutputs out;
  out.value = push(Op::NetOut, rec_idx, 0, rec.ws.value());
  const int d = params.spec().input_dim();
  for (int k = 0; k < d; ++k)
    if (mask.grad_mask & (1u << k))
      out.grad[k] = push(Op::NetOut, rec_idx, 1 + k, rec.ws.grad(k));
  for (int pr = 0; pr < kMaxPairs; ++pr)
    if (mask.pair_mask & (1u << pr))
      out.second[pr] = push(Op::NetOut, rec_idx, 1 + kMaxInputDim + pr, rec.ws.second(pr));
  return out;
}

void Tape::backward(const Expr& root, double seed) {
  adj_.assign(nodes_.size(), 0.0);
  if (root.idx < 0) return;
  adj_[root.idx] = seed;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    const double ad = adj_[i];
    if (ad == 0.0) continue;
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::Const:
      case Op::Leaf:
        break;
      case Op::Add:
        adj_[n.a] += ad;
        adj_[n.b] += ad;
        break;
      case Op::Sub:
        adj_[n.a] += ad;
        adj_[n.b] -= ad;
        break;
      case Op::Mul:
        adj_[n.a] += ad * nodes_[n.b].val;
        adj_[n.b] += ad * nodes_[n.a].val;
        break;
      case Op::Div:
        adj_[n.a] += ad / nodes_[n.b].val;
        adj_[n.b] -= ad * n.val / nodes_[n.b].val;
        break;
      case Op::Neg:
        adj_[n.a] -= ad;
        break;
      case Op::Exp:
        adj_[n.a] += ad * n.val;
        break;
      case Op::Log:
        adj_[n.a] += ad / nodes_[n.a].val;
        break;
      case Op::Sqrt:
        adj_[n.a] += ad * 0.5 / n.val;
        break;
      case Op::Tanh:
        adj_[n.a] += ad * (1.0 - n.val * n.val);
        break;
      case Op::NetOut:
        recs_[n.a].out_adj[n.b] += ad;
        break;
    }
  }
  for (std::size_t rix = 0; rix < live_recs_; ++rix) {
    NetRec& rec = recs_[rix];
    if (rec.slot < 0) continue;
    bool any = false;
    for (double v : rec.out_adj)
      if (v != 0.0) {
        any = true;
        break;
      }
    if (!any) continue;
    std::span<const double> ag(rec.out_adj.data() + 1, kMaxInputDim);
    std::span<const double> as(rec.out_adj.data() + 1 + kMaxInputDim, kMaxPairs);
    rec.ws.reverse(*rec.params, rec.out_adj[0], ag, as, slot_grads_[rec.slot]);
  }
}

void Tape::reset_nodes() {
  nodes_.clear();
  live_recs_ = 0;
}

namespace {
inline Tape* tape_of(const Expr& a, const Expr& b) { return a.tape ? a.tape : b.tape; }
}  // namespace

Expr operator+(const Expr& a, const Expr& b) {
  return tape_of(a, b)->push(Tape::Op::Add, a.idx, b.idx, a.val + b.val);
}
Expr operator-(const Expr& a, const Expr& b) {
  return tape_of(a, b)->push(Tape::Op::Sub, a.idx, b.idx, a.val - b.val);
}
Expr operator*(const Expr& a, const Expr& b) {
  return tape_of(a, b)->push(Tape::Op::Mul, a.idx, b.idx, a.val * b.val);
}
Expr operator/(const Expr& a, const Expr& b) {
  return tape_of(a, b)->push(Tape::Op::Div, a.idx, b.idx, a.val / b.val);
}
Expr operator-(const Expr& a) { return a.tape->push(Tape::Op::Neg, a.idx, -1, -a.val); }
Expr exp(const Expr& a) { return a.tape->push(Tape::Op::Exp, a.idx, -1, std::exp(a.val)); }
Expr log(const Expr& a) { return a.tape->push(Tape::Op::Log, a.idx, -1, std::log(a.val)); }
Expr sqrt(const Expr& a) { return a.tape->push(Tape::Op::Sqrt, a.idx, -1, std::sqrt(a.val)); }
Expr tanh(const Expr& a) { return a.tape->push(Tape::Op::Tanh, a.idx, -1, std::tanh(a.val)); }

}  // namespace adepinn
