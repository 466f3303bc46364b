#include "hpf/envs/matrix_game.hpp"

#include <stdexcept>

namespace hpf::envs {

MatrixGame::MatrixGame() : spec_{2, kActions, 2, 2, 1} {}

void MatrixGame::reset(std::uint64_t) { steps_ = 0; }

float MatrixGame::payoff(int a0, int a1) {
  if (a0 < 0 || a0 >= kActions || a1 < 0 || a1 >= kActions)
    throw std::out_of_range("matrix game action out of range");
  return kPayoff[static_cast<std::size_t>(a0)][static_cast<std::size_t>(a1)];
}

StepResult MatrixGame::step(std::span<const int> actions) {
  check_actions(actions);
  if (steps_ != 0) throw std::logic_error("matrix game is a one-step game; call reset()");
  ++steps_;
  StepResult r;
  r.reward = payoff(actions[0], actions[1]);
  r.terminated = true;
  r.next_observations = observations();
  r.next_state = state();
  return r;
}

std::vector<float> MatrixGame::observe(int agent) const {
  if (agent < 0 || agent >= spec_.n_agents) throw std::out_of_range("invalid agent id " + std::to_string(agent));
  return std::vector<float>(static_cast<std::size_t>(spec_.obs_width), 1.0f);
}

std::vector<float> MatrixGame::state() const {
  return std::vector<float>(static_cast<std::size_t>(spec_.state_width), 1.0f);
}

}  // namespace hpf::envs
