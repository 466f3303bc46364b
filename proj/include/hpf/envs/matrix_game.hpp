#pragma once

#include <array>

#include "hpf/envs/environment.hpp"

namespace hpf::envs {

/// One-step, two-agent, three-action cooperative game. The optimum (u1, u1)
/// pays 8 but miscoordinating on u1 costs -12; u2/u3 form a safe basin.
class MatrixGame final : public Environment {
 public:
  static constexpr int kActions = 3;
  static constexpr std::array<std::array<float, kActions>, kActions> kPayoff{{
      {8.0f, -12.0f, -12.0f},
      {-12.0f, 3.0f, 0.0f},
      {-12.0f, 0.0f, 3.0f},
  }};

  MatrixGame();

  const EnvSpec& spec() const override { return spec_; }
  void reset(std::uint64_t seed) override;
  StepResult step(std::span<const int> actions) override;
  std::vector<float> observe(int agent) const override;
  std::vector<float> state() const override;
  int steps_taken() const override { return steps_; }

  static float payoff(int a0, int a1);

 private:
  EnvSpec spec_;
  int steps_ = 0;
};

}  // namespace hpf::envs
