#pragma once

#include <random>
#include <vector>

#include "hpf/envs/environment.hpp"

namespace hpf::envs {

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct PredatorPreyConfig {
  int grid = 10;
  int n_predators = 8;
  int n_prey = 8;
  int episode_limit = 200;
  float capture_reward = 10.0f;
  float miscapture_penalty = -2.0f;
  int sight = 5;

  static PredatorPreyConfig standard() { return {}; }
  static PredatorPreyConfig small() { return {7, 4, 4, 200, 10.0f, -2.0f, 5}; }
};

struct PredatorPreyState {
  int grid = 0;
  std::vector<Cell> predators;
  std::vector<Cell> prey;
  std::vector<bool> prey_alive;
  int step = 0;
};

/// Partially observable pursuit on a square grid. Predators move, then
/// prey adjacent to at least two catching predators are captured, then the
/// surviving prey take a random legal step.
class PredatorPrey final : public Environment {
 public:
  enum Action : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4, kCatch = 5 };
  static constexpr int kActions = 6;
  static constexpr int kChannels = 3;  // predator, prey, out of bounds

  explicit PredatorPrey(PredatorPreyConfig config = PredatorPreyConfig::standard());

  const EnvSpec& spec() const override { return spec_; }
  const PredatorPreyConfig& config() const { return config_; }
  void reset(std::uint64_t seed) override;
  StepResult step(std::span<const int> actions) override;
  /// Flattened sight window, channel-major: index = channel*s*s + row*s + col
  /// with the agent at the centre.
  std::vector<float> observe(int agent) const override;
  /// Normalised (row, col) of every predator then every prey, then the prey
  /// alive flags. Captured prey report (0, 0).
  std::vector<float> state() const override;
  int steps_taken() const override { return state_.step; }

  const PredatorPreyState& snapshot() const { return state_; }
  /// Places entities directly (tests and scripted scenarios). The RNG keeps
  /// its current stream.
  void set_state(PredatorPreyState s);
  int prey_remaining() const;

 private:
  bool occupied(Cell c) const;
  bool in_bounds(Cell c) const;
  void check_invariants() const;

  PredatorPreyConfig config_;
  EnvSpec spec_;
  PredatorPreyState state_;
  std::mt19937_64 rng_;
};

}  // namespace hpf::envs
