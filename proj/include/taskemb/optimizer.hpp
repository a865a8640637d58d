#pragma once

#include "taskemb/tensor.hpp"

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace taskemb {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct Moments {
  std::vector<Scalar> m;
  std::vector<Scalar> v;
};

/// One adaptive-moment update with decoupled weight decay, in place:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   theta <- theta - lr (m_hat / (sqrt(v_hat) + eps) + lambda theta)
/// `step` is the 1-based update count used for bias correction.
void adamw_update(std::span<Scalar> theta, std::span<const Scalar> grad, Moments& state, std::size_t step, double lr,
                  const AdamWOptions& options);

/// AdamW over a fixed, named parameter set. Parameters outside the set never
/// receive state or updates.
class AdamW {
public:
  AdamW(std::vector<std::pair<std::string, Tensor>> params, AdamWOptions options = {});

  /// Applies one update from the parameters' current gradients. A non-finite
  /// gradient aborts the whole step with NumericError before anything changes.
  void step(double lr);
  void zero_grad();

  std::size_t steps() const { return steps_; }
  const std::map<std::string, Moments>& state() const { return state_; }
  void load_state(std::map<std::string, Moments> state, std::size_t steps);
  const std::vector<std::pair<std::string, Tensor>>& parameters() const { return params_; }

private:
  std::vector<std::pair<std::string, Tensor>> params_;
  AdamWOptions options_;
  std::map<std::string, Moments> state_;
  std::size_t steps_ = 0;
};

/// Linear warm-up from 0 to max_lr over `warmup` steps, then linear decay to 0
/// at `total`.
double lr_schedule(std::size_t step, std::size_t warmup, std::size_t total, double max_lr);

}  // namespace taskemb
