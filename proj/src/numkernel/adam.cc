#include "cbert/numkernel/adam.h"

#include <cmath>

#include "cbert/common/errors.h"

namespace cbert::nk {
namespace {

void update_buffer(std::span<double> param, std::span<const double> grad, std::span<double> m,
                   std::span<double> v, std::uint64_t step, const AdamState& hyper) {
  const double t = static_cast<double>(step);
  const double correction1 = 1.0 - std::pow(hyper.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.empty() ? 0.0 : grad[i];
    m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
    v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    param[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

void ensure_moments(AdamState& state, const std::vector<std::size_t>& sizes) {
  if (state.m.empty()) state.m.resize(sizes.size());
  if (state.v.empty()) state.v.resize(sizes.size());
  if (state.m.size() != sizes.size() || state.v.size() != sizes.size()) {
    throw DimensionError("adam: state tracks " + std::to_string(state.m.size()) + " parameters, got " +
                         std::to_string(sizes.size()));
  }
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (state.m[i].empty()) state.m[i].assign(sizes[i], 0.0);
    if (state.v[i].empty()) state.v[i].assign(sizes[i], 0.0);
    if (state.m[i].size() != sizes[i] || state.v[i].size() != sizes[i]) {
      throw DimensionError("adam: moment buffer " + std::to_string(i) + " does not match its parameter");
    }
  }
}

}  // namespace

AdamStepResult adam_step(const std::vector<Buffer>& params, const std::vector<Buffer>& grads,
                         const AdamState& state) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  std::vector<std::size_t> sizes;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size()) {
      throw DimensionError("adam_step: parameter " + std::to_string(i) + " has " +
                           std::to_string(params[i].size()) + " values, gradient has " +
                           std::to_string(grads[i].size()));
    }
    sizes.push_back(params[i].size());
  }
  AdamStepResult result{params, state};
  ensure_moments(result.state, sizes);
  result.state.step += 1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    update_buffer(result.params[i], grads[i], result.state.m[i], result.state.v[i], result.state.step,
                  result.state);
  }
  return result;
}

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)) {
  state_.lr = lr;
  state_.beta1 = beta1;
  state_.beta2 = beta2;
  state_.eps = eps;
  std::vector<std::size_t> sizes;
  for (const Tensor& p : params_) sizes.push_back(p.numel());
  ensure_moments(state_, sizes);
}

void Adam::step() {
  state_.step += 1;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    update_buffer(p.mutable_data(), p.grad(), state_.m[i], state_.v[i], state_.step, state_);
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const Tensor& p : params) {
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (Tensor& p : params) {
      if (!p.has_grad()) continue;
      for (double& g : p.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

}  // namespace cbert::nk
