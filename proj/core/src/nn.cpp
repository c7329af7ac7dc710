#include "adepinn/nn.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "adepinn/errors.hpp"

namespace adepinn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using VMap = Eigen::Map<Eigen::VectorXd>;
using CVMap = Eigen::Map<const Eigen::VectorXd>;

enum class ActKind : std::uint8_t { Tanh, Identity, Sigmoid, Softplus };

ActKind layer_act(const MlpSpec& spec, int l) {
  if (l < spec.layer_count()) return ActKind::Tanh;
  switch (spec.output) {
    case OutputActivation::Identity: return ActKind::Identity;
    case OutputActivation::Sigmoid: return ActKind::Sigmoid;
    case OutputActivation::Softplus: return ActKind::Softplus;
  }
  return ActKind::Identity;
}

double act_value(ActKind k, double p) {
  switch (k) {
    case ActKind::Tanh: return std::tanh(p);
    case ActKind::Identity: return p;
    case ActKind::Sigmoid: return 1.0 / (1.0 + std::exp(-p));
    case ActKind::Softplus: return p > 30.0 ? p : std::log1p(std::exp(p));
  }
  return p;
}

// First three activation derivatives, recovered from the activation value so
// the reverse pass never re-evaluates transcendentals.
void act_derivs(ActKind k, double a, double& d1, double& d2, double& d3) {
  switch (k) {
    case ActKind::Tanh:
      d1 = 1.0 - a * a;
      d2 = -2.0 * a * d1;
      d3 = (6.0 * a * a - 2.0) * d1;
      return;
    case ActKind::Identity:
      d1 = 1.0;
      d2 = d3 = 0.0;
      return;
    case ActKind::Sigmoid:
      d1 = a * (1.0 - a);
      d2 = d1 * (1.0 - 2.0 * a);
      d3 = d1 * (1.0 - 6.0 * a + 6.0 * a * a);
      return;
    case ActKind::Softplus: {
      const double s = 1.0 - std::exp(-a);  // sigmoid of the pre-activation
      d1 = s;
      d2 = s * (1.0 - s);
      d3 = d2 * (1.0 - 2.0 * s);
      return;
    }
  }
}

}  // namespace

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
  }
  return "tanh";
}

const char* to_string(OutputActivation a) {
  switch (a) {
    case OutputActivation::Identity: return "identity";
    case OutputActivation::Sigmoid: return "sigmoid";
    case OutputActivation::Softplus: return "softplus";
  }
  return "identity";
}

int MlpSpec::max_width() const {
  int m = 0;
  for (int s : layer_sizes) m = std::max(m, s);
  return m;
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (int l = 0; l + 1 < static_cast<int>(layer_sizes.size()); ++l)
    n += static_cast<std::size_t>(layer_sizes[l + 1]) * layer_sizes[l] + layer_sizes[l + 1];
  return n;
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2)
    throw InvalidArchitectureError("network needs at least an input and an output layer");
  for (int s : layer_sizes)
    if (s <= 0) throw InvalidArchitectureError("layer sizes must be positive");
  if (layer_sizes.back() != 1)
    throw InvalidArchitectureError("output layer must have width 1 (scalar field)");
}

ParamSet::ParamSet(MlpSpec spec, std::vector<double> theta) : spec_(std::move(spec)), theta_(std::move(theta)) {
  spec_.validate();
  if (theta_.size() != spec_.param_count())
    throw InvalidArchitectureError("parameter vector length does not match architecture");
  build_offsets();
}

ParamSet::ParamSet(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  theta_.assign(spec_.param_count(), 0.0);
  build_offsets();
}

void ParamSet::build_offsets() {
  offsets_.clear();
  std::size_t off = 0;
  for (int l = 0; l < spec_.layer_count(); ++l) {
    offsets_.push_back(off);
    off += static_cast<std::size_t>(rows(l)) * cols(l) + rows(l);
  }
}

std::span<const double> ParamSet::weights(int l) const {
  return {theta_.data() + offsets_[l], static_cast<std::size_t>(rows(l)) * cols(l)};
}
std::span<double> ParamSet::weights(int l) {
  return {theta_.data() + offsets_[l], static_cast<std::size_t>(rows(l)) * cols(l)};
}
std::size_t ParamSet::bias_offset(int l) const {
  return offsets_[l] + static_cast<std::size_t>(rows(l)) * cols(l);
}
std::span<const double> ParamSet::biases(int l) const {
  return {theta_.data() + bias_offset(l), static_cast<std::size_t>(rows(l))};
}
std::span<double> ParamSet::biases(int l) {
  return {theta_.data() + bias_offset(l), static_cast<std::size_t>(rows(l))};
}

ParamSet xavier_init(const std::vector<int>& layer_sizes, std::uint64_t seed,
                     Activation hidden, OutputActivation output) {
  MlpSpec spec{layer_sizes, hidden, output};
  spec.validate();
  ParamSet ps(spec);
  std::mt19937_64 rng(seed);
  for (int l = 0; l < spec.layer_count(); ++l) {
    const double bound = std::sqrt(6.0 / (ps.cols(l) + ps.rows(l)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : ps.weights(l)) w = dist(rng);
    // biases stay zero
  }
  return ps;
}

int pair_index(int j, int k) {
  if (j > k) std::swap(j, k);
  if (j == k) return j;
  if (j == 0 && k == 1) return 3;
  if (j == 0 && k == 2) return 4;
  return 5;  // (1,2)
}

std::array<int, 2> pair_dims(int pair) {
  static constexpr std::array<std::array<int, 2>, kMaxPairs> table{
      {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}}};
  return table[pair];
}

DerivMask DerivMask::with_grads(int dim) {
  DerivMask m;
  m.grad_mask = static_cast<std::uint8_t>((1u << dim) - 1u);
  return m;
}

DerivMask DerivMask::full(int dim) {
  DerivMask m = with_grads(dim);
  for (int j = 0; j < dim; ++j)
    for (int k = j; k < dim; ++k) m.pair_mask |= static_cast<std::uint8_t>(1u << pair_index(j, k));
  return m;
}

std::uint8_t DerivMask::tangent_mask() const {
  std::uint8_t t = grad_mask;
  for (int pr = 0; pr < kMaxPairs; ++pr)
    if (pair_mask & (1u << pr)) {
      auto [j, k] = pair_dims(pr);
      t |= static_cast<std::uint8_t>((1u << j) | (1u << k));
    }
  return t;
}

void Workspace::prepare(const MlpSpec& spec, const DerivMask& mask) {
  spec.validate();
  if (spec.input_dim() > kMaxInputDim)
    throw InvalidInputError("derivative evaluation supports at most 3 network inputs");
  spec_ = spec;
  mask_ = mask;
  tangents_ = mask.tangent_mask();
  n_layers_ = spec.layer_count();
  max_w_ = spec.max_width();
  const std::size_t lw = static_cast<std::size_t>(n_layers_ + 1) * max_w_;
  const std::size_t lp = static_cast<std::size_t>(n_layers_) * max_w_;
  a_.assign(lw, 0.0);
  p_.assign(lp, 0.0);
  t_.assign(kMaxInputDim * lw, 0.0);
  q_.assign(kMaxInputDim * lp, 0.0);
  s_.assign(kMaxPairs * lw, 0.0);
  r_.assign(kMaxPairs * lp, 0.0);
  abar_.assign(2 * static_cast<std::size_t>(max_w_), 0.0);
  tbar_.assign(kMaxInputDim * 2 * static_cast<std::size_t>(max_w_), 0.0);
  sbar_.assign(kMaxPairs * 2 * static_cast<std::size_t>(max_w_), 0.0);
  pbar_.assign(max_w_, 0.0);
  qbar_.assign(kMaxInputDim * static_cast<std::size_t>(max_w_), 0.0);
  rbar_.assign(kMaxPairs * static_cast<std::size_t>(max_w_), 0.0);
}

double Workspace::forward(const ParamSet& params, std::span<const double> x, const DerivMask& mask) {
  if (params.spec() != spec_ || mask.grad_mask != mask_.grad_mask || mask.pair_mask != mask_.pair_mask)
    prepare(params.spec(), mask);
  const int d = spec_.input_dim();
  if (static_cast<int>(x.size()) != d)
    throw InvalidInputError("input length does not match the network's first layer width");

  // Layer 0: inputs, unit tangents, zero second tangents.
  std::fill(a(0), a(0) + max_w_, 0.0);
  std::copy(x.begin(), x.end(), a(0));
  for (int k = 0; k < d; ++k)
    if (tangents_ & (1u << k)) {
      std::fill(t(k, 0), t(k, 0) + max_w_, 0.0);
      t(k, 0)[k] = 1.0;
    }
  for (int pr = 0; pr < kMaxPairs; ++pr)
    if (mask_.pair_mask & (1u << pr)) std::fill(s(pr, 0), s(pr, 0) + max_w_, 0.0);

  for (int l = 1; l <= n_layers_; ++l) {
    const int cin = spec_.layer_sizes[l - 1];
    const int cout = spec_.layer_sizes[l];
    CMap W(params.weights(l - 1).data(), cout, cin);
    CVMap b(params.biases(l - 1).data(), cout);
    VMap(p(l), cout).noalias() = W * CVMap(a(l - 1), cin) + b;
    for (int k = 0; k < d; ++k)
      if (tangents_ & (1u << k)) VMap(q(k, l), cout).noalias() = W * CVMap(t(k, l - 1), cin);
    for (int pr = 0; pr < kMaxPairs; ++pr)
      if (mask_.pair_mask & (1u << pr)) VMap(r(pr, l), cout).noalias() = W * CVMap(s(pr, l - 1), cin);

    const ActKind kind = layer_act(spec_, l);
    double* pa = a(l);
    const double* pp = p(l);
    for (int i = 0; i < cout; ++i) pa[i] = act_value(kind, pp[i]);
    if (tangents_ || mask_.pair_mask) {
      for (int i = 0; i < cout; ++i) {
        double d1, d2, d3;
        act_derivs(kind, pa[i], d1, d2, d3);
        for (int k = 0; k < d; ++k)
          if (tangents_ & (1u << k)) t(k, l)[i] = d1 * q(k, l)[i];
        for (int pr = 0; pr < kMaxPairs; ++pr)
          if (mask_.pair_mask & (1u << pr)) {
            auto [j, k] = pair_dims(pr);
            s(pr, l)[i] = d2 * q(j, l)[i] * q(k, l)[i] + d1 * r(pr, l)[i];
          }
      }
    }
  }

  value_ = a(n_layers_)[0];
  for (int k = 0; k < kMaxInputDim; ++k) grad_[k] = (tangents_ & (1u << k)) ? t(k, n_layers_)[0] : 0.0;
  for (int pr = 0; pr < kMaxPairs; ++pr)
    second_[pr] = (mask_.pair_mask & (1u << pr)) ? s(pr, n_layers_)[0] : 0.0;
  return value_;
}

void Workspace::reverse(const ParamSet& params, double adj_value,
                        std::span<const double> adj_grad, std::span<const double> adj_second,
                        std::span<double> grad_out) {
  const int d = spec_.input_dim();
  int bank = 0;
  auto ab = [&](int bk) { return abar_.data() + bk * max_w_; };
  auto tb = [&](int k, int bk) { return tbar_.data() + (2 * static_cast<std::size_t>(k) + bk) * max_w_; };
  auto sb = [&](int pr, int bk) { return sbar_.data() + (2 * static_cast<std::size_t>(pr) + bk) * max_w_; };

  // Seed adjoints at the scalar output.
  std::fill(ab(bank), ab(bank) + max_w_, 0.0);
  ab(bank)[0] = adj_value;
  for (int k = 0; k < d; ++k)
    if (tangents_ & (1u << k)) {
      std::fill(tb(k, bank), tb(k, bank) + max_w_, 0.0);
      tb(k, bank)[0] = k < static_cast<int>(adj_grad.size()) ? adj_grad[k] : 0.0;
    }
  for (int pr = 0; pr < kMaxPairs; ++pr)
    if (mask_.pair_mask & (1u << pr)) {
      std::fill(sb(pr, bank), sb(pr, bank) + max_w_, 0.0);
      sb(pr, bank)[0] = pr < static_cast<int>(adj_second.size()) ? adj_second[pr] : 0.0;
    }

  for (int l = n_layers_; l >= 1; --l) {
    const int cin = spec_.layer_sizes[l - 1];
    const int cout = spec_.layer_sizes[l];
    const ActKind kind = layer_act(spec_, l);
    const double* pa = a(l);

    std::fill(pbar_.begin(), pbar_.begin() + cout, 0.0);
    for (int k = 0; k < d; ++k)
      if (tangents_ & (1u << k)) std::fill(qbar_.begin() + k * max_w_, qbar_.begin() + k * max_w_ + cout, 0.0);

    for (int i = 0; i < cout; ++i) {
      double d1, d2, d3;
      act_derivs(kind, pa[i], d1, d2, d3);
      double pb = ab(bank)[i] * d1;
      for (int pr = 0; pr < kMaxPairs; ++pr)
        if (mask_.pair_mask & (1u << pr)) {
          auto [j, k] = pair_dims(pr);
          const double sba = sb(pr, bank)[i];
          const double qj = q(j, l)[i], qk = q(k, l)[i];
          pb += sba * (d3 * qj * qk + d2 * r(pr, l)[i]);
          qbar_[j * max_w_ + i] += sba * d2 * qk;
          qbar_[k * max_w_ + i] += sba * d2 * qj;
          rbar_[pr * max_w_ + i] = sba * d1;
        }
      for (int k = 0; k < d; ++k)
        if (tangents_ & (1u << k)) {
          const double tba = tb(k, bank)[i];
          pb += tba * d2 * q(k, l)[i];
          qbar_[k * max_w_ + i] += tba * d1;
        }
      pbar_[i] = pb;
    }

    CMap W(params.weights(l - 1).data(), cout, cin);
    Eigen::Map<RowMat> Wbar(grad_out.data() + params.weight_offset(l - 1), cout, cin);
    VMap bbar(grad_out.data() + params.bias_offset(l - 1), cout);
    const int nxt = 1 - bank;

    CVMap pb(pbar_.data(), cout);
    Wbar.noalias() += pb * CVMap(a(l - 1), cin).transpose();
    bbar.noalias() += pb;
    VMap(ab(nxt), cin).noalias() = W.transpose() * pb;
    for (int k = 0; k < d; ++k)
      if (tangents_ & (1u << k)) {
        CVMap qb(qbar_.data() + k * max_w_, cout);
        Wbar.noalias() += qb * CVMap(t(k, l - 1), cin).transpose();
        VMap(tb(k, nxt), cin).noalias() = W.transpose() * qb;
      }
    for (int pr = 0; pr < kMaxPairs; ++pr)
      if (mask_.pair_mask & (1u << pr)) {
        CVMap rb(rbar_.data() + pr * max_w_, cout);
        Wbar.noalias() += rb * CVMap(s(pr, l - 1), cin).transpose();
        VMap(sb(pr, nxt), cin).noalias() = W.transpose() * rb;
      }
    bank = nxt;
  }
}

EvalResult evaluate(const ParamSet& params, const EvalRequest& req) {
  Workspace ws;
  DerivMask mask = req.wants;
  ws.prepare(params.spec(), mask);
  ws.forward(params, req.input, mask);

  EvalResult res;
  res.value = ws.value();
  const int d = params.spec().input_dim();
  for (int k = 0; k < d; ++k)
    if (mask.grad_mask & (1u << k)) res.grad_input[k] = ws.grad(k);
  for (int j = 0; j < d; ++j)
    for (int k = j; k < d; ++k) {
      const int pr = pair_index(j, k);
      if (mask.pair_mask & (1u << pr)) {
        res.second_input[j][k] = ws.second(pr);
        res.second_input[k][j] = ws.second(pr);
      }
    }
  if (mask.param_grads) {
    res.param_grads.assign(params.size(), 0.0);
    std::array<double, kMaxInputDim> zg{};
    std::array<double, kMaxPairs> zs{};
    ws.reverse(params, 1.0, zg, zs, res.param_grads);
  }

  bool finite = std::isfinite(res.value);
  for (int k = 0; k < d && finite; ++k)
    if (mask.grad_mask & (1u << k)) finite = std::isfinite(res.grad_input[k]);
  for (int pr = 0; pr < kMaxPairs && finite; ++pr)
    if (mask.pair_mask & (1u << pr)) {
      auto [j, k] = pair_dims(pr);
      finite = std::isfinite(res.second_input[j][k]);
    }
  if (!finite) throw NumericOverflowError("network evaluation produced a non-finite value");
  return res;
}

namespace {
constexpr const char* kCheckpointMagic = "ADEPINN-CKPT-1";

OutputActivation parse_output_activation(const std::string& s) {
  if (s == "identity") return OutputActivation::Identity;
  if (s == "sigmoid") return OutputActivation::Sigmoid;
  if (s == "softplus") return OutputActivation::Softplus;
  throw InvalidInputError("unknown output activation in checkpoint: " + s);
}
}  // namespace

void save_checkpoint(const ParamSet& params, std::ostream& os) {
  os << kCheckpointMagic << "\n";
  os << "layers";
  for (int s : params.spec().layer_sizes) os << ' ' << s;
  os << "\nhidden " << to_string(params.spec().hidden);
  os << "\noutput " << to_string(params.spec().output);
  os << "\nparams " << params.size() << "\n";
  char buf[64];
  for (double v : params.flat()) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    os << buf;
  }
}

ParamSet load_checkpoint(std::istream& is) {
  std::string magic;
  std::getline(is, magic);
  if (magic != kCheckpointMagic) throw InvalidInputError("not an adepinn checkpoint (bad magic)");
  std::string line, key;
  MlpSpec spec;
  std::size_t count = 0;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    ls >> key;
    if (key == "layers") {
      int s;
      while (ls >> s) spec.layer_sizes.push_back(s);
    } else if (key == "hidden") {
      std::string v;
      ls >> v;
      if (v != "tanh") throw InvalidInputError("unknown hidden activation in checkpoint: " + v);
      spec.hidden = Activation::Tanh;
    } else if (key == "output") {
      std::string v;
      ls >> v;
      spec.output = parse_output_activation(v);
    } else if (key == "params") {
      ls >> count;
      break;
    } else {
      throw InvalidInputError("unexpected checkpoint header line: " + line);
    }
  }
  std::vector<double> theta;
  theta.reserve(count);
  double v;
  while (theta.size() < count && is >> v) theta.push_back(v);
  if (theta.size() != count) throw InvalidInputError("checkpoint truncated");
  return ParamSet(spec, std::move(theta));
}

void save_checkpoint_file(const ParamSet& params, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InvalidInputError("cannot open checkpoint file for writing: " + path);
  save_checkpoint(params, os);
}

ParamSet load_checkpoint_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInputError("cannot open checkpoint file: " + path);
  return load_checkpoint(is);
}

}  // namespace adepinn
