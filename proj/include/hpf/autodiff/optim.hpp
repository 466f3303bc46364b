#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "hpf/autodiff/tensor.hpp"

namespace hpf::ad {

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
void init_uniform(Parameter& p, int fan_in, std::mt19937_64& rng);

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping. A non-positive `max_norm` disables it.
float clip_grad_norm(std::span<Parameter* const> params, float max_norm);

void zero_grad(std::span<Parameter* const> params);

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// Applies one update from each parameter's accumulated gradient.
  virtual void step(std::span<Parameter* const> params) = 0;
  float learning_rate() const { return lr_; }

 protected:
  explicit Optimizer(float lr) : lr_(lr) {}
  void check_state(std::span<Parameter* const> params, std::vector<std::vector<float>>& state) const;

  float lr_;
};

/// RMSprop without momentum or weight decay:
///   s <- alpha*s + (1-alpha)*g^2;  p <- p - lr * g / (sqrt(s) + eps)
class RmsProp final : public Optimizer {
 public:
  explicit RmsProp(float lr = 5e-4f, float alpha = 0.99f, float eps = 1e-5f) : Optimizer(lr), alpha_(alpha), eps_(eps) {}
  void step(std::span<Parameter* const> params) override;
  const std::vector<std::vector<float>>& square_avg() const { return square_avg_; }

 private:
  float alpha_;
  float eps_;
  std::vector<std::vector<float>> square_avg_;
};

/// Adam with bias correction.
class Adam final : public Optimizer {
 public:
  explicit Adam(float lr = 5e-4f, float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f)
      : Optimizer(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(std::span<Parameter* const> params) override;
  std::int64_t steps() const { return t_; }

 private:
  float beta1_;
  float beta2_;
  float eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

}  // namespace hpf::ad
