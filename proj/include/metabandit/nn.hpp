#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "metabandit/rng.hpp"

namespace metabandit::nn {

struct NetDims {
  int input_dim = 0;
  int hidden_dim = 0;
  int action_dim = 0;

  bool operator==(const NetDims&) const = default;
};

/// Gate blocks inside the packed LSTM matrices, top to bottom.
inline constexpr const char* kGateLayout = "ifgo";

/// One named tensor inside the flat parameter vector (column-major storage).
struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  bool weight_decay = false;  ///< true for weight matrices only
};

/// Ordered tensor table: w_input (4H x I), w_recurrent (4H x H), bias (4H),
/// w_policy (A x H), b_policy (A), w_value (1 x H), b_value (1), h0 (H), c0 (H).
std::vector<TensorInfo> param_layout(const NetDims& dims);
std::size_t param_count(const NetDims& dims);

/// Single-layer LSTM trunk shared by a softmax policy head and a scalar value
/// head, plus trainable initial hidden and cell states. All tensors live in
/// one flat vector so gradients and optimizer moments share the same type.
class NetParams {
 public:
  using Matrix = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatrix = Eigen::Map<const Eigen::MatrixXd>;
  using Vector = Eigen::Map<Eigen::VectorXd>;
  using ConstVector = Eigen::Map<const Eigen::VectorXd>;

  NetParams() = default;
  explicit NetParams(const NetDims& dims);  ///< all zeros

  const NetDims& dims() const { return dims_; }
  Eigen::VectorXd& flat() { return flat_; }
  const Eigen::VectorXd& flat() const { return flat_; }

  Matrix w_input() { return matrix(0, 4 * H(), I()); }
  Matrix w_recurrent() { return matrix(off_recurrent(), 4 * H(), H()); }
  Vector bias() { return vector(off_bias(), 4 * H()); }
  Matrix w_policy() { return matrix(off_policy(), A(), H()); }
  Vector b_policy() { return vector(off_policy() + A() * H(), A()); }
  Matrix w_value() { return matrix(off_value(), 1, H()); }
  double& b_value() { return flat_[off_value() + H()]; }
  Vector h0() { return vector(off_value() + H() + 1, H()); }
  Vector c0() { return vector(off_value() + 2 * H() + 1, H()); }

  ConstMatrix w_input() const { return matrix(0, 4 * H(), I()); }
  ConstMatrix w_recurrent() const { return matrix(off_recurrent(), 4 * H(), H()); }
  ConstVector bias() const { return vector(off_bias(), 4 * H()); }
  ConstMatrix w_policy() const { return matrix(off_policy(), A(), H()); }
  ConstVector b_policy() const { return vector(off_policy() + A() * H(), A()); }
  ConstMatrix w_value() const { return matrix(off_value(), 1, H()); }
  double b_value() const { return flat_[off_value() + H()]; }
  ConstVector h0() const { return vector(off_value() + H() + 1, H()); }
  ConstVector c0() const { return vector(off_value() + 2 * H() + 1, H()); }

  /// 1 for entries subject to weight decay, 0 otherwise.
  Eigen::VectorXd decay_mask() const;

 private:
  int I() const { return dims_.input_dim; }
  int H() const { return dims_.hidden_dim; }
  int A() const { return dims_.action_dim; }
  std::size_t off_recurrent() const { return std::size_t(4) * H() * I(); }
  std::size_t off_bias() const { return off_recurrent() + std::size_t(4) * H() * H(); }
  std::size_t off_policy() const { return off_bias() + std::size_t(4) * H(); }
  std::size_t off_value() const { return off_policy() + std::size_t(A()) * H() + A(); }

  Matrix matrix(std::size_t off, int r, int c) { return Matrix(flat_.data() + off, r, c); }
  ConstMatrix matrix(std::size_t off, int r, int c) const { return ConstMatrix(flat_.data() + off, r, c); }
  Vector vector(std::size_t off, int n) { return Vector(flat_.data() + off, n); }
  ConstVector vector(std::size_t off, int n) const { return ConstVector(flat_.data() + off, n); }

  NetDims dims_;
  Eigen::VectorXd flat_;
};

using Gradients = NetParams;

/// Orthogonal input/recurrent blocks per gate (QR of a Gaussian matrix with
/// sign correction), forget-gate bias 1, other biases 0, heads N(0, 0.01^2),
/// zero initial states.
NetParams init_params(const NetDims& dims, Rng& rng);

/// Orthogonal rows x cols matrix: Q Q^T = I when rows <= cols, Q^T Q = I otherwise.
Eigen::MatrixXd random_orthogonal(int rows, int cols, Rng& rng);

struct NetState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;
};

NetState initial_state(const NetParams& params);

/// Everything backward() needs, for up to `capacity` steps.
/// Column t of hidden/cell holds the state *before* step t; column t+1 the state after.
struct ForwardTrace {
  ForwardTrace() = default;
  ForwardTrace(const NetDims& dims, int capacity);

  /// Clears the trace and seeds column 0 with the learned initial state.
  void reset(const NetParams& params);
  /// Runs one LSTM step on x, appending to the trace. Throws TrainingError on
  /// non-finite outputs, naming the step index.
  void push(const NetParams& params, const Eigen::Ref<const Eigen::VectorXd>& x);

  int length = 0;
  Eigen::MatrixXd inputs;     ///< I x cap
  Eigen::MatrixXd hidden;     ///< H x (cap + 1)
  Eigen::MatrixXd cell;       ///< H x (cap + 1)
  Eigen::MatrixXd gates;      ///< 4H x cap, post-activation
  Eigen::MatrixXd tanh_cell;  ///< H x cap
  Eigen::MatrixXd logits;     ///< A x cap
  Eigen::VectorXd values;     ///< cap
};

struct StepOutput {
  NetState state;
  Eigen::VectorXd logits;
  double value = 0.0;
  Eigen::VectorXd gates;  ///< post-activation gates, the step cache
};

/// Standalone single step: c' = f*c + i*g, h' = o*tanh(c'), heads read h'.
StepOutput forward_step(const NetParams& params, const NetState& state,
                        const Eigen::Ref<const Eigen::VectorXd>& x);

/// Exact BPTT through the whole trace, including into h0 and c0.
/// dlogits is A x length, dvalues has `length` entries.
Gradients backward(const NetParams& params, const ForwardTrace& trace,
                   const Eigen::Ref<const Eigen::MatrixXd>& dlogits,
                   const Eigen::Ref<const Eigen::VectorXd>& dvalues);

struct SoftmaxEntropy {
  Eigen::VectorXd probs;
  double entropy = 0.0;  ///< nats
};

SoftmaxEntropy softmax_entropy(const Eigen::Ref<const Eigen::VectorXd>& logits);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  ///< decoupled, scaled by lr
  double grad_clip = 10.0;    ///< global L2 norm; <= 0 disables
};

struct OptimizerState {
  AdamConfig config;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long long step = 0;

  OptimizerState() = default;
  OptimizerState(const AdamConfig& cfg, std::size_t size)
      : config(cfg), m(Eigen::VectorXd::Zero(size)), v(Eigen::VectorXd::Zero(size)) {}
};

struct StepInfo {
  double grad_norm = 0.0;   ///< before clipping
  double clip_scale = 1.0;  ///< factor applied to the gradient
};

/// Clip to the global norm, decay masked entries by lr * weight_decay, then
/// take a bias-corrected Adam step. Throws TrainingError on non-finite grads.
StepInfo adam_update(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads,
                     const Eigen::Ref<const Eigen::VectorXd>& decay_mask, OptimizerState& state);

StepInfo optimizer_step(NetParams& params, const Gradients& grads, OptimizerState& state);

}  // namespace metabandit::nn
