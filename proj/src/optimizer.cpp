#include "taskemb/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace taskemb {

void adamw_update(std::span<Scalar> theta, std::span<const Scalar> grad, Moments& state, std::size_t step, double lr,
                  const AdamWOptions& o) {
  if (theta.size() != grad.size()) throw std::invalid_argument("adamw_update: gradient shape mismatch");
  if (lr < 0.0) throw std::invalid_argument("adamw_update: negative learning rate");
  if (step == 0) throw std::invalid_argument("adamw_update: steps are 1-based");
  if (state.m.empty()) {
    state.m.assign(theta.size(), 0.0);
    state.v.assign(theta.size(), 0.0);
  }
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    state.m[i] = o.beta1 * state.m[i] + (1.0 - o.beta1) * g;
    state.v[i] = o.beta2 * state.v[i] + (1.0 - o.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    theta[i] -= lr * (m_hat / (std::sqrt(v_hat) + o.eps) + o.weight_decay * theta[i]);
  }
}

AdamW::AdamW(std::vector<std::pair<std::string, Tensor>> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  for (auto& [name, t] : params_) {
    if (!t.is_leaf()) throw std::invalid_argument("optimizer parameter '" + name + "' is not a leaf");
  }
}

void AdamW::step(double lr) {
  for (const auto& [name, t] : params_) {
    for (Scalar g : t.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in '" + name + "'");
    }
  }
  ++steps_;
  for (auto& [name, t] : params_) {
    const auto g = t.grad();
    if (g.empty()) continue;  // not reached by this step's loss
    adamw_update(t.mutable_data(), g, state_[name], steps_, lr, options_);
  }
}

void AdamW::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

void AdamW::load_state(std::map<std::string, Moments> state, std::size_t steps) {
  state_ = std::move(state);
  steps_ = steps;
}

double lr_schedule(std::size_t step, std::size_t warmup, std::size_t total, double max_lr) {
  if (warmup == 0 || warmup >= total) throw std::invalid_argument("lr_schedule: need 0 < warmup < total");
  if (step > total) throw std::invalid_argument("lr_schedule: step beyond total");
  if (step <= warmup) return max_lr * static_cast<double>(step) / static_cast<double>(warmup);
  return max_lr * static_cast<double>(total - step) / static_cast<double>(total - warmup);
}

}  // namespace taskemb
