#include "hpf/replay/replay.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hpf::replay {

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

template <typename T>
void append(std::vector<T>& out, std::span<const T> in, std::size_t expected, const char* what) {
  if (in.size() != expected)
    throw std::invalid_argument(std::string("episode record: ") + what + " has " + std::to_string(in.size()) +
                                " entries, expected " + std::to_string(expected));
  out.insert(out.end(), in.begin(), in.end());
}

}  // namespace

void EpisodeRecord::begin(std::span<const float> obs, std::span<const float> state,
                          std::span<const std::uint8_t> avail) {
  if (length != 0 || !states.empty()) throw std::logic_error("episode record: begin() called twice");
  append(observations, obs, sz(shape.n_agents * shape.obs_width), "observation");
  append(states, state, sz(shape.state_width), "state");
  append(available, avail, sz(shape.n_agents * shape.n_actions), "available actions");
}

void EpisodeRecord::add(std::span<const int> joint_action, float reward, bool term, int selected,
                        std::span<const float> next_obs, std::span<const float> next_state,
                        std::span<const std::uint8_t> next_avail) {
  if (states.empty()) throw std::logic_error("episode record: add() before begin()");
  if (!terminated.empty() && terminated.back()) throw std::logic_error("episode record: add() after termination");
  append(actions, joint_action, sz(shape.n_agents), "joint action");
  rewards.push_back(reward);
  terminated.push_back(term ? 1 : 0);
  selection.push_back(static_cast<std::int8_t>(selected));
  append(observations, next_obs, sz(shape.n_agents * shape.obs_width), "observation");
  append(states, next_state, sz(shape.state_width), "state");
  append(available, next_avail, sz(shape.n_agents * shape.n_actions), "available actions");
  ++length;
}

float EpisodeRecord::total_reward() const { return std::accumulate(rewards.begin(), rewards.end(), 0.0f); }

void EpisodeRecord::validate() const {
  const auto fail = [](const std::string& m) { throw std::invalid_argument("malformed episode: " + m); };
  if (shape.n_agents <= 0 || shape.n_actions <= 0 || shape.obs_width <= 0 || shape.state_width <= 0)
    fail("non-positive shape");
  if (length <= 0) fail("no transitions");
  const std::size_t steps = sz(length);
  if (observations.size() != (steps + 1) * sz(shape.n_agents * shape.obs_width)) fail("observation count");
  if (states.size() != (steps + 1) * sz(shape.state_width)) fail("state count");
  if (available.size() != (steps + 1) * sz(shape.n_agents * shape.n_actions)) fail("available-action count");
  if (actions.size() != steps * sz(shape.n_agents)) fail("action count");
  if (rewards.size() != steps || terminated.size() != steps || selection.size() != steps) fail("per-step field count");
  for (int a : actions)
    if (a < 0 || a >= shape.n_actions) fail("action out of range");
  for (std::size_t t = 0; t + 1 < steps; ++t)
    if (terminated[t]) fail("termination before the last step");
  if (static_cast<bool>(terminated.back()) == truncated) fail("last step must be exactly one of terminated/truncated");
}

double masked_mean(std::span<const float> values, std::span<const float> mask) {
  if (values.size() != mask.size()) throw std::invalid_argument("masked_mean: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (mask[i] == 0.0f) continue;
    num += static_cast<double>(values[i]) * mask[i];
    den += mask[i];
  }
  return den > 0.0 ? num / den : 0.0;
}

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity <= 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push_episode(EpisodeRecord episode) {
  episode.validate();
  if (!episodes_.empty() && !(episode.shape == episodes_.front().shape))
    throw std::invalid_argument("malformed episode: shape differs from buffer contents");
  if (size() < capacity_) {
    episodes_.push_back(std::move(episode));
  } else {
    episodes_[head_] = std::move(episode);
    head_ = (head_ + 1) % sz(capacity_);
  }
  ++inserted_;
}

const EpisodeRecord& ReplayBuffer::at(int index) const {
  if (index < 0 || index >= size()) throw std::out_of_range("replay index " + std::to_string(index));
  return episodes_[(head_ + sz(index)) % episodes_.size()];
}

std::vector<int> ReplayBuffer::sample_indices(int b, Rng& rng) const {
  if (b <= 0 || b > size()) throw std::invalid_argument("cannot sample " + std::to_string(b) + " of " + std::to_string(size()));
  std::vector<int> idx(sz(size()));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < b; ++i) std::swap(idx[sz(i)], idx[sz(i + uniform_int(rng, size() - i))]);
  idx.resize(sz(b));
  return idx;
}

std::optional<EpisodeBatch> ReplayBuffer::sample_batch(int b, Rng& rng) const {
  if (b <= 0) throw std::invalid_argument("batch size must be positive");
  if (size() < b) return std::nullopt;
  return make_batch(sample_indices(b, rng));
}

EpisodeBatch ReplayBuffer::make_batch(std::span<const int> indices) const {
  if (indices.empty()) throw std::invalid_argument("make_batch: no indices");
  EpisodeBatch out;
  out.shape = at(indices[0]).shape;
  out.batch = static_cast<int>(indices.size());
  for (int i : indices) out.max_length = std::max(out.max_length, at(i).length);
  const EpisodeShape& s = out.shape;
  const std::size_t B = sz(out.batch), T = sz(out.max_length);
  const std::size_t obs_block = sz(s.n_agents * s.obs_width), n = sz(s.n_agents), S = sz(s.state_width);
  out.observations.assign((T + 1) * B * obs_block, 0.0f);
  out.states.assign((T + 1) * B * S, 0.0f);
  out.actions.assign(T * B * n, 0);
  out.rewards.assign(T * B, 0.0f);
  out.terminated.assign(T * B, 0.0f);
  out.mask.assign(T * B, 0.0f);
  out.selection.assign(T * B, -1);
  for (std::size_t b = 0; b < B; ++b) {
    const EpisodeRecord& e = at(indices[b]);
    const std::size_t L = sz(e.length);
    for (std::size_t t = 0; t <= L; ++t) {
      std::copy_n(e.observations.begin() + static_cast<std::ptrdiff_t>(t * obs_block), obs_block,
                  out.observations.begin() + static_cast<std::ptrdiff_t>((t * B + b) * obs_block));
      std::copy_n(e.states.begin() + static_cast<std::ptrdiff_t>(t * S), S,
                  out.states.begin() + static_cast<std::ptrdiff_t>((t * B + b) * S));
    }
    for (std::size_t t = 0; t < L; ++t) {
      const std::size_t row = t * B + b;
      std::copy_n(e.actions.begin() + static_cast<std::ptrdiff_t>(t * n), n,
                  out.actions.begin() + static_cast<std::ptrdiff_t>(row * n));
      out.rewards[row] = e.rewards[t];
      out.terminated[row] = e.terminated[t] ? 1.0f : 0.0f;
      out.mask[row] = 1.0f;
      out.selection[row] = e.selection[t];
    }
  }
  return out;
}

}  // namespace hpf::replay
