#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace adepinn {

enum class Activation : std::uint8_t { Tanh };
enum class OutputActivation : std::uint8_t { Identity, Sigmoid, Softplus };

const char* to_string(Activation a);
const char* to_string(OutputActivation a);

/// Architecture of a fully connected scalar-output network: layer_sizes holds
/// the input width followed by every layer's output width; the last entry
/// must be 1.
struct MlpSpec {
  std::vector<int> layer_sizes;
  Activation hidden = Activation::Tanh;
  OutputActivation output = OutputActivation::Identity;

  int input_dim() const { return layer_sizes.front(); }
  int layer_count() const { return static_cast<int>(layer_sizes.size()) - 1; }
  int hidden_layer_count() const { return layer_count() - 1; }
  int max_width() const;
  std::size_t param_count() const;
  void validate() const;  // throws InvalidArchitectureError
  bool operator==(const MlpSpec&) const = default;
};

/// Weights and biases of one network, stored as a single flattened vector
/// (layer by layer: row-major weight matrix, then bias). Optimizers operate
/// directly on the flat view.
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(MlpSpec spec, std::vector<double> theta);
  explicit ParamSet(MlpSpec spec);  // zero-initialized

  const MlpSpec& spec() const { return spec_; }
  std::span<double> flat() { return theta_; }
  std::span<const double> flat() const { return theta_; }
  std::size_t size() const { return theta_.size(); }

  // Row-major weight matrix of layer l (0-based), shape rows(l) x cols(l).
  std::span<const double> weights(int l) const;
  std::span<double> weights(int l);
  std::span<const double> biases(int l) const;
  std::span<double> biases(int l);
  int rows(int l) const { return spec_.layer_sizes[l + 1]; }
  int cols(int l) const { return spec_.layer_sizes[l]; }
  std::size_t weight_offset(int l) const { return offsets_[l]; }
  std::size_t bias_offset(int l) const;

 private:
  MlpSpec spec_;
  std::vector<double> theta_;
  std::vector<std::size_t> offsets_;  // start of layer l's weight block
  void build_offsets();
};

/// Xavier/Glorot uniform initialization: weights on +-sqrt(6/(fan_in+fan_out)),
/// biases zero. Bit-deterministic for a fixed seed.
ParamSet xavier_init(const std::vector<int>& layer_sizes, std::uint64_t seed,
                     Activation hidden = Activation::Tanh,
                     OutputActivation output = OutputActivation::Identity);

constexpr int kMaxInputDim = 3;
constexpr int kMaxPairs = 6;  // (j,k) with j <= k, d <= 3

/// Index of the (j,k) pair, j <= k, in the fixed enumeration
/// (0,0),(1,1),(2,2),(0,1),(0,2),(1,2).
int pair_index(int j, int k);
std::array<int, 2> pair_dims(int pair);

/// Which derivatives a network evaluation must produce. grad_mask/pair_mask
/// are bit sets over input coordinates / pair_index values. Tangents needed
/// by requested pairs are activated automatically.
struct DerivMask {
  bool value = true;
  std::uint8_t grad_mask = 0;
  std::uint8_t pair_mask = 0;
  bool param_grads = false;

  static DerivMask value_only() { return {}; }
  static DerivMask with_grads(int dim);
  static DerivMask full(int dim);  // all first and second derivatives
  std::uint8_t tangent_mask() const;
};

struct EvalRequest {
  std::vector<double> input;
  DerivMask wants = DerivMask::full(3);
};

struct EvalResult {
  double value = 0.0;
  std::array<double, kMaxInputDim> grad_input{};
  std::array<std::array<double, kMaxInputDim>, kMaxInputDim> second_input{};
  std::vector<double> param_grads;  // d(value)/d(theta), ParamSet layout
};

/// Scratch buffers for one network evaluation; reusable across calls and
/// points, one instance per thread. Holds the forward state (activations and
/// input-tangents per layer) that the reverse pass consumes.
class Workspace {
 public:
  void prepare(const MlpSpec& spec, const DerivMask& mask);

  // Forward pass: x has spec.input_dim() entries. Returns network value and
  // fills first/second derivative slots active in the mask.
  double forward(const ParamSet& params, std::span<const double> x, const DerivMask& mask);

  double value() const { return value_; }
  double grad(int k) const { return grad_[k]; }
  double second(int pair) const { return second_[pair]; }

  // Reverse pass through the forward state: seeds are adjoints of the value,
  // first derivatives, and second derivatives; parameter gradients are added
  // into grad_out (ParamSet layout). Must follow a forward() with the same
  // mask and parameters.
  void reverse(const ParamSet& params, double adj_value,
               std::span<const double> adj_grad, std::span<const double> adj_second,
               std::span<double> grad_out);

 private:
  MlpSpec spec_;
  DerivMask mask_;
  int n_layers_ = 0;
  int max_w_ = 0;
  std::uint8_t tangents_ = 0;
  // Forward state. Layer index 0 is the input; layers 1..L are affine+act.
  std::vector<double> a_;   // activations, (L+1) x max_w
  std::vector<double> p_;   // pre-activations, L x max_w
  std::vector<double> t_;   // tangents, kMaxInputDim x (L+1) x max_w
  std::vector<double> q_;   // W * t_in, kMaxInputDim x L x max_w
  std::vector<double> s_;   // second tangents, kMaxPairs x (L+1) x max_w
  std::vector<double> r_;   // W * s_in, kMaxPairs x L x max_w
  // Reverse scratch.
  std::vector<double> abar_, tbar_, sbar_, pbar_, qbar_, rbar_;
  double value_ = 0.0;
  std::array<double, kMaxInputDim> grad_{};
  std::array<double, kMaxPairs> second_{};

  double* a(int l) { return a_.data() + static_cast<std::size_t>(l) * max_w_; }
  double* p(int l) { return p_.data() + static_cast<std::size_t>(l - 1) * max_w_; }
  double* t(int k, int l) {
    return t_.data() + (static_cast<std::size_t>(k) * (n_layers_ + 1) + l) * max_w_;
  }
  double* q(int k, int l) {
    return q_.data() + (static_cast<std::size_t>(k) * n_layers_ + (l - 1)) * max_w_;
  }
  double* s(int pr, int l) {
    return s_.data() + (static_cast<std::size_t>(pr) * (n_layers_ + 1) + l) * max_w_;
  }
  double* r(int pr, int l) {
    return r_.data() + (static_cast<std::size_t>(pr) * n_layers_ + (l - 1)) * max_w_;
  }
  friend class Tape;
};

/// Evaluates the network and the derivatives requested in req.wants.
/// Derivatives are exact (reverse for parameters, forward tangents through
/// the layers for input derivatives), not finite differences.
EvalResult evaluate(const ParamSet& params, const EvalRequest& req);

/// Checkpoint serialization: a small text header (magic string, layer sizes,
/// activations) followed by the flattened parameters, one %.17g value per
/// line. Round-trips bit-exactly.
void save_checkpoint(const ParamSet& params, std::ostream& os);
ParamSet load_checkpoint(std::istream& is);
void save_checkpoint_file(const ParamSet& params, const std::string& path);
ParamSet load_checkpoint_file(const std::string& path);

}  // namespace adepinn
