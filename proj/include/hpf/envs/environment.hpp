#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hpf::envs {

struct EnvSpec {
  int n_agents = 0;
  int n_actions = 0;
  int obs_width = 0;
  int state_width = 0;
  int episode_limit = 0;

  /// Throws unless every field is positive.
  void validate() const;
};

struct StepResult {
  float reward = 0.0f;  // shared team reward
  bool terminated = false;
  bool truncated_by_limit = false;
  std::vector<std::vector<float>> next_observations;
  std::vector<float> next_state;
};

/// Cooperative Dec-POMDP with a homogeneous discrete action set.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual void reset(std::uint64_t seed) = 0;
  /// One joint step; `actions` has one entry per agent.
  virtual StepResult step(std::span<const int> actions) = 0;
  virtual std::vector<float> observe(int agent) const = 0;
  virtual std::vector<float> state() const = 0;
  virtual std::vector<int> available_actions(int agent) const;
  virtual int steps_taken() const = 0;

  std::vector<std::vector<float>> observations() const;

 protected:
  void check_actions(std::span<const int> actions) const;
};

/// Builds an environment by name: "matrix", "pp" or "pp-small".
std::unique_ptr<Environment> make_environment(const std::string& name, int episode_limit = 0);

}  // namespace hpf::envs
