#include "hpf/autodiff/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace hpf::ad {

void init_uniform(Parameter& p, int fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (float& x : p.value.data()) {
    // 53 random bits -> [0, 1); avoids implementation-defined distributions.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    x = static_cast<float>((2.0 * u - 1.0) * bound);
  }
  p.zero_grad();
}

float clip_grad_norm(std::span<Parameter* const> params, float max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (float g : p->grad) sq += static_cast<double>(g) * g;
  const auto norm = static_cast<float>(std::sqrt(sq));
  if (max_norm > 0.0f && norm > max_norm) {
    const float k = max_norm / (norm + 1e-6f);
    for (Parameter* p : params)
      for (float& g : p->grad) g *= k;
  }
  return norm;
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

void Optimizer::check_state(std::span<Parameter* const> params, std::vector<std::vector<float>>& state) const {
  if (state.empty()) {
    for (const Parameter* p : params) state.emplace_back(p->value.size(), 0.0f);
    return;
  }
  if (state.size() != params.size()) throw std::invalid_argument("optimizer: parameter list changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state[i].size() != params[i]->value.size())
      throw std::invalid_argument("optimizer: shape mismatch for parameter " + params[i]->name);
  }
}

void RmsProp::step(std::span<Parameter* const> params) {
  check_state(params, square_avg_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.requires_grad) continue;
    if (p.grad.size() != p.value.size()) throw std::invalid_argument("rmsprop: gradient shape mismatch for " + p.name);
    std::vector<float>& s = square_avg_[i];
    for (std::size_t j = 0; j < s.size(); ++j) {
      const float g = p.grad[j];
      s[j] = alpha_ * s[j] + (1.0f - alpha_) * g * g;
      p.value[j] -= lr_ * g / (std::sqrt(s[j]) + eps_);
    }
  }
}

void Adam::step(std::span<Parameter* const> params) {
  check_state(params, m_);
  check_state(params, v_);
  ++t_;
  const float bc1 = 1.0f - std::pow(beta1_, static_cast<float>(t_));
  const float bc2 = 1.0f - std::pow(beta2_, static_cast<float>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.requires_grad) continue;
    if (p.grad.size() != p.value.size()) throw std::invalid_argument("adam: gradient shape mismatch for " + p.name);
    std::vector<float>& m = m_[i];
    std::vector<float>& v = v_[i];
    for (std::size_t j = 0; j < m.size(); ++j) {
      const float g = p.grad[j];
      m[j] = beta1_ * m[j] + (1.0f - beta1_) * g;
      v[j] = beta2_ * v[j] + (1.0f - beta2_) * g * g;
      const float m_hat = m[j] / bc1;
      const float v_hat = v[j] / bc2;
      p.value[j] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

}  // namespace hpf::ad
