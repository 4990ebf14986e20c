#include "metabandit/nn.hpp"

#include <cmath>
#include <string>

#include "metabandit/errors.hpp"

namespace metabandit::nn {
namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// One LSTM cell step. `gates` enters holding the pre-activations and leaves
// holding the activations (i, f, o sigmoid; g tanh).
void cell_step(const NetParams& p, const Eigen::Ref<const Eigen::VectorXd>& x,
               const Eigen::Ref<const Eigen::VectorXd>& h, const Eigen::Ref<const Eigen::VectorXd>& c,
               Eigen::Ref<Eigen::VectorXd> gates, Eigen::Ref<Eigen::VectorXd> c_out,
               Eigen::Ref<Eigen::VectorXd> tanh_c, Eigen::Ref<Eigen::VectorXd> h_out,
               Eigen::Ref<Eigen::VectorXd> logits, double& value) {
  const int H = p.dims().hidden_dim;
  gates.noalias() = p.w_input() * x;
  gates.noalias() += p.w_recurrent() * h;
  gates += p.bias();
  for (int k = 0; k < 2 * H; ++k) gates[k] = sigmoid(gates[k]);
  for (int k = 2 * H; k < 3 * H; ++k) gates[k] = std::tanh(gates[k]);
  for (int k = 3 * H; k < 4 * H; ++k) gates[k] = sigmoid(gates[k]);

  const auto i = gates.segment(0, H);
  const auto f = gates.segment(H, H);
  const auto g = gates.segment(2 * H, H);
  const auto o = gates.segment(3 * H, H);
  c_out = f.cwiseProduct(c) + i.cwiseProduct(g);
  tanh_c = c_out.array().tanh();
  h_out = o.cwiseProduct(tanh_c);
  logits.noalias() = p.w_policy() * h_out;
  logits += p.b_policy();
  value = p.w_value().row(0).dot(h_out) + p.b_value();
}

void check_dims(const NetParams& params, Eigen::Index x_size) {
  if (x_size != params.dims().input_dim)
    throw ContractError("input has " + std::to_string(x_size) + " entries, network expects " +
                        std::to_string(params.dims().input_dim));
}

}  // namespace

std::vector<TensorInfo> param_layout(const NetDims& d) {
  const int I = d.input_dim, H = d.hidden_dim, A = d.action_dim;
  std::vector<TensorInfo> layout = {
      {"w_input", 4 * H, I, 0, true},   {"w_recurrent", 4 * H, H, 0, true},
      {"bias", 4 * H, 1, 0, false},     {"w_policy", A, H, 0, true},
      {"b_policy", A, 1, 0, false},     {"w_value", 1, H, 0, true},
      {"b_value", 1, 1, 0, false},      {"h0", H, 1, 0, false},
      {"c0", H, 1, 0, false},
  };
  std::size_t offset = 0;
  for (auto& t : layout) {
    t.offset = offset;
    offset += static_cast<std::size_t>(t.rows) * t.cols;
  }
  return layout;
}

std::size_t param_count(const NetDims& dims) {
  const auto layout = param_layout(dims);
  return layout.back().offset + static_cast<std::size_t>(layout.back().rows) * layout.back().cols;
}

NetParams::NetParams(const NetDims& dims) : dims_(dims) {
  if (dims.input_dim < 1 || dims.hidden_dim < 1 || dims.action_dim < 1)
    throw ConfigError("network dimensions must be positive");
  flat_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_count(dims)));
}

Eigen::VectorXd NetParams::decay_mask() const {
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(flat_.size());
  for (const auto& t : param_layout(dims_))
    if (t.weight_decay) mask.segment(t.offset, static_cast<Eigen::Index>(t.rows) * t.cols).setOnes();
  return mask;
}

Eigen::MatrixXd random_orthogonal(int rows, int cols, Rng& rng) {
  const bool tall = rows >= cols;
  const int m = tall ? rows : cols;
  const int k = tall ? cols : rows;
  Eigen::MatrixXd gaussian(m, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < m; ++i) gaussian(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, k);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  // Sign correction makes the result Haar-distributed.
  for (int j = 0; j < k; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  if (tall) return q;
  return q.transpose();
}

NetParams init_params(const NetDims& dims, Rng& rng) {
  NetParams p(dims);
  const int H = dims.hidden_dim;
  for (int gate = 0; gate < 4; ++gate) {
    p.w_input().middleRows(gate * H, H) = random_orthogonal(H, dims.input_dim, rng);
    p.w_recurrent().middleRows(gate * H, H) = random_orthogonal(H, H, rng);
  }
  p.bias().setZero();
  p.bias().segment(H, H).setOnes();
  for (Eigen::Index k = 0; k < p.w_policy().size(); ++k) p.w_policy().data()[k] = 0.01 * rng.normal();
  for (Eigen::Index k = 0; k < p.w_value().size(); ++k) p.w_value().data()[k] = 0.01 * rng.normal();
  p.b_policy().setZero();
  p.b_value() = 0.0;
  p.h0().setZero();
  p.c0().setZero();
  return p;
}

NetState initial_state(const NetParams& params) {
  return {params.h0(), params.c0()};
}

ForwardTrace::ForwardTrace(const NetDims& d, int capacity)
    : inputs(d.input_dim, capacity),
      hidden(d.hidden_dim, capacity + 1),
      cell(d.hidden_dim, capacity + 1),
      gates(4 * d.hidden_dim, capacity),
      tanh_cell(d.hidden_dim, capacity),
      logits(d.action_dim, capacity),
      values(capacity) {}

void ForwardTrace::reset(const NetParams& params) {
  length = 0;
  hidden.col(0) = params.h0();
  cell.col(0) = params.c0();
}

void ForwardTrace::push(const NetParams& params, const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_dims(params, x.size());
  if (length >= inputs.cols()) throw ContractError("forward trace capacity exceeded");
  const int t = length;
  inputs.col(t) = x;
  double value = 0.0;
  cell_step(params, inputs.col(t), hidden.col(t), cell.col(t), gates.col(t), cell.col(t + 1),
            tanh_cell.col(t), hidden.col(t + 1), logits.col(t), value);
  values[t] = value;
  if (!std::isfinite(value) || !logits.col(t).allFinite())
    throw TrainingError("non-finite network output at step " + std::to_string(t));
  length = t + 1;
}

StepOutput forward_step(const NetParams& params, const NetState& state,
                        const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_dims(params, x.size());
  const auto& d = params.dims();
  StepOutput out;
  out.state.h.resize(d.hidden_dim);
  out.state.c.resize(d.hidden_dim);
  out.logits.resize(d.action_dim);
  out.gates.resize(4 * d.hidden_dim);
  Eigen::VectorXd tanh_c(d.hidden_dim);
  cell_step(params, x, state.h, state.c, out.gates, out.state.c, tanh_c, out.state.h, out.logits, out.value);
  if (!std::isfinite(out.value) || !out.logits.allFinite())
    throw TrainingError("non-finite network output at step 0");
  return out;
}

Gradients backward(const NetParams& params, const ForwardTrace& trace,
                   const Eigen::Ref<const Eigen::MatrixXd>& dlogits,
                   const Eigen::Ref<const Eigen::VectorXd>& dvalues) {
  const auto& d = params.dims();
  const int T = trace.length;
  const int H = d.hidden_dim;
  if (dlogits.cols() != T || dvalues.size() != T || dlogits.rows() != d.action_dim)
    throw ContractError("loss gradient shape does not match trace length " + std::to_string(T));

  Gradients grads(d);
  if (T == 0) return grads;

  Eigen::MatrixXd dz(4 * H, T);
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dh(H), dc(H);
  const Eigen::VectorXd w_value = params.w_value().row(0).transpose();

  for (int t = T - 1; t >= 0; --t) {
    const auto i = trace.gates.col(t).segment(0, H);
    const auto f = trace.gates.col(t).segment(H, H);
    const auto g = trace.gates.col(t).segment(2 * H, H);
    const auto o = trace.gates.col(t).segment(3 * H, H);
    const auto tc = trace.tanh_cell.col(t);
    const auto c_prev = trace.cell.col(t);

    dh.noalias() = params.w_policy().transpose() * dlogits.col(t);
    dh += dvalues[t] * w_value + dh_next;
    dc = dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix()) + dc_next;

    auto col = dz.col(t);
    col.segment(0, H) = (dc.array() * g.array() * i.array() * (1.0 - i.array())).matrix();
    col.segment(H, H) = (dc.array() * c_prev.array() * f.array() * (1.0 - f.array())).matrix();
    col.segment(2 * H, H) = (dc.array() * i.array() * (1.0 - g.array().square())).matrix();
    col.segment(3 * H, H) = (dh.array() * tc.array() * o.array() * (1.0 - o.array())).matrix();

    dc_next = dc.cwiseProduct(f);
    dh_next.noalias() = params.w_recurrent().transpose() * col;
  }

  const auto inputs = trace.inputs.leftCols(T);
  const auto h_before = trace.hidden.leftCols(T);
  const auto h_after = trace.hidden.middleCols(1, T);
  grads.w_input().noalias() = dz * inputs.transpose();
  grads.w_recurrent().noalias() = dz * h_before.transpose();
  grads.bias() = dz.rowwise().sum();
  grads.w_policy().noalias() = dlogits * h_after.transpose();
  grads.b_policy() = dlogits.rowwise().sum();
  grads.w_value().noalias() = dvalues.transpose() * h_after.transpose();
  grads.b_value() = dvalues.sum();
  grads.h0() = dh_next;
  grads.c0() = dc_next;
  return grads;
}

SoftmaxEntropy softmax_entropy(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  SoftmaxEntropy out;
  const Eigen::ArrayXd shifted = logits.array() - logits.maxCoeff();
  const Eigen::ArrayXd e = shifted.exp();
  const double z = e.sum();
  out.probs = (e / z).matrix();
  // H = log Z - sum p * shifted, which stays finite for saturated logits.
  out.entropy = std::log(z) - (out.probs.array() * shifted).sum();
  if (out.entropy < 0.0) out.entropy = 0.0;
  return out;
}

StepInfo adam_update(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads,
                     const Eigen::Ref<const Eigen::VectorXd>& decay_mask, OptimizerState& state) {
  const auto& cfg = state.config;
  if (grads.size() != params.size() || state.m.size() != params.size() || decay_mask.size() != params.size())
    throw ContractError("optimizer shapes do not match parameters");
  if (!grads.allFinite()) throw TrainingError("non-finite gradient at optimizer step " + std::to_string(state.step));

  StepInfo info;
  info.grad_norm = grads.norm();
  if (cfg.grad_clip > 0.0 && info.grad_norm > cfg.grad_clip) info.clip_scale = cfg.grad_clip / info.grad_norm;

  ++state.step;
  if (cfg.weight_decay != 0.0) params.array() -= cfg.lr * cfg.weight_decay * decay_mask.array() * params.array();

  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (Eigen::Index k = 0; k < params.size(); ++k) {
    const double g = grads[k] * info.clip_scale;
    state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
    state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g * g;
    params[k] -= cfg.lr * (state.m[k] / bias1) / (std::sqrt(state.v[k] / bias2) + cfg.eps);
  }
  return info;
}

StepInfo optimizer_step(NetParams& params, const Gradients& grads, OptimizerState& state) {
  if (!(grads.dims() == params.dims())) throw ContractError("gradient dims do not match parameters");
  return adam_update(params.flat(), grads.flat(), params.decay_mask(), state);
}

}  // namespace metabandit::nn
