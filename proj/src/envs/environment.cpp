#include "hpf/envs/environment.hpp"

#include <stdexcept>

#include "hpf/envs/matrix_game.hpp"
#include "hpf/envs/predator_prey.hpp"

namespace hpf::envs {

void EnvSpec::validate() const {
  if (n_agents <= 0 || n_actions <= 0 || obs_width <= 0 || state_width <= 0 || episode_limit <= 0)
    throw std::invalid_argument("environment spec fields must all be positive");
}

std::vector<int> Environment::available_actions(int agent) const {
  if (agent < 0 || agent >= spec().n_agents) throw std::out_of_range("invalid agent id " + std::to_string(agent));
  return std::vector<int>(static_cast<std::size_t>(spec().n_actions), 1);
}

std::vector<std::vector<float>> Environment::observations() const {
  std::vector<std::vector<float>> out;
  for (int i = 0; i < spec().n_agents; ++i) out.push_back(observe(i));
  return out;
}

void Environment::check_actions(std::span<const int> actions) const {
  if (static_cast<int>(actions.size()) != spec().n_agents) {
    throw std::invalid_argument("expected " + std::to_string(spec().n_agents) + " actions, got " +
                                std::to_string(actions.size()));
  }
  for (int a : actions) {
    if (a < 0 || a >= spec().n_actions)
      throw std::out_of_range("action " + std::to_string(a) + " outside [0, " + std::to_string(spec().n_actions) + ")");
  }
}

std::unique_ptr<Environment> make_environment(const std::string& name, int episode_limit) {
  if (name == "matrix") return std::make_unique<MatrixGame>();
  PredatorPreyConfig cfg;
  if (name == "pp")
    cfg = PredatorPreyConfig::standard();
  else if (name == "pp-small")
    cfg = PredatorPreyConfig::small();
  else
    throw std::invalid_argument("unknown environment '" + name + "' (expected matrix, pp or pp-small)");
  if (episode_limit > 0) cfg.episode_limit = episode_limit;
  return std::make_unique<PredatorPrey>(cfg);
}

}  // namespace hpf::envs
