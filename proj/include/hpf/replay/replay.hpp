#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hpf/random.hpp"

namespace hpf::replay {

struct EpisodeShape {
  int n_agents = 0;
  int n_actions = 0;
  int obs_width = 0;
  int state_width = 0;
  friend bool operator==(const EpisodeShape&, const EpisodeShape&) = default;
};

/// One episode of `length` transitions. Observations, states and available
/// actions have length + 1 entries (the final one is the bootstrap step).
struct EpisodeRecord {
  static constexpr std::int8_t kNoSelection = -1;

  EpisodeShape shape;
  int length = 0;
  std::vector<float> observations;      // (length+1) x n_agents x obs_width
  std::vector<float> states;            // (length+1) x state_width
  std::vector<std::uint8_t> available;  // (length+1) x n_agents x n_actions
  std::vector<int> actions;             // length x n_agents
  std::vector<float> rewards;           // length
  std::vector<std::uint8_t> terminated; // length
  bool truncated = false;               // last step hit the episode limit
  std::vector<std::int8_t> selection;   // length; index of the acting policy or kNoSelection

  explicit EpisodeRecord(EpisodeShape s = {}) : shape(s) {}

  /// Starts the record with the initial observation, state and availability.
  void begin(std::span<const float> obs, std::span<const float> state, std::span<const std::uint8_t> avail);
  /// Appends one transition and the resulting observation/state.
  void add(std::span<const int> joint_action, float reward, bool term, int selected, std::span<const float> next_obs,
           std::span<const float> next_state, std::span<const std::uint8_t> next_avail);
  float total_reward() const;
  /// Throws std::invalid_argument unless the sizes and flags are consistent.
  void validate() const;
};

/// Time-major padded batch. Rows are indexed (t * batch + b) for per-step
/// fields and ((t * batch + b) * n_agents + i) for per-agent fields.
struct EpisodeBatch {
  EpisodeShape shape;
  int batch = 0;
  int max_length = 0;               // T
  std::vector<float> observations;  // (T+1) x B x n x obs
  std::vector<float> states;        // (T+1) x B x state
  std::vector<int> actions;         // T x B x n (0 on padding)
  std::vector<float> rewards;       // T x B
  std::vector<float> terminated;    // T x B
  std::vector<float> mask;          // T x B, 1 on real transitions
  std::vector<int> selection;       // T x B, -1 on padding or when absent
};

/// sum(values * mask) / sum(mask), or 0 when the mask is empty.
double masked_mean(std::span<const float> values, std::span<const float> mask);

class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity = 5000);

  void push_episode(EpisodeRecord episode);
  int size() const { return static_cast<int>(episodes_.size()); }
  int capacity() const { return capacity_; }
  std::uint64_t inserted() const { return inserted_; }
  /// Episode by age: 0 is the oldest held.
  const EpisodeRecord& at(int index) const;

  /// `b` distinct indices drawn uniformly (partial Fisher-Yates).
  std::vector<int> sample_indices(int b, Rng& rng) const;
  /// Empty when fewer than `b` episodes are held.
  std::optional<EpisodeBatch> sample_batch(int b, Rng& rng) const;
  EpisodeBatch make_batch(std::span<const int> indices) const;

 private:
  int capacity_;
  std::size_t head_ = 0;  // slot of the oldest episode once full
  std::uint64_t inserted_ = 0;
  std::vector<EpisodeRecord> episodes_;
};

}  // namespace hpf::replay
