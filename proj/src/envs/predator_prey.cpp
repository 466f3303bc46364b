#include "hpf/envs/predator_prey.hpp"

#include <algorithm>
#include <stdexcept>

#include "hpf/random.hpp"

namespace hpf::envs {
namespace {

constexpr Cell kMoves[4] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};

Cell offset(Cell c, Cell d) { return {c.row + d.row, c.col + d.col}; }

bool adjacent(Cell a, Cell b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col) == 1; }

}  // namespace

PredatorPrey::PredatorPrey(PredatorPreyConfig config) : config_(config) {
  if (config_.grid <= 0 || config_.n_predators <= 0 || config_.n_prey <= 0 || config_.sight <= 0 ||
      config_.sight % 2 == 0)
    throw std::invalid_argument("predator-prey: invalid configuration");
  if (config_.n_predators + config_.n_prey > config_.grid * config_.grid)
    throw std::invalid_argument("predator-prey: more entities than cells");
  spec_.n_agents = config_.n_predators;
  spec_.n_actions = kActions;
  spec_.obs_width = kChannels * config_.sight * config_.sight;
  spec_.state_width = 2 * (config_.n_predators + config_.n_prey) + config_.n_prey;
  spec_.episode_limit = config_.episode_limit;
  spec_.validate();
  reset(0);
}

void PredatorPrey::reset(std::uint64_t seed) {
  rng_.seed(seed);
  const int cells = config_.grid * config_.grid;
  std::vector<int> order(static_cast<std::size_t>(cells));
  for (int i = 0; i < cells; ++i) order[static_cast<std::size_t>(i)] = i;
  const int needed = config_.n_predators + config_.n_prey;
  for (int i = 0; i < needed; ++i) {
    const int j = i + uniform_int(rng_, cells - i);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  auto cell_of = [&](int idx) { return Cell{idx / config_.grid, idx % config_.grid}; };
  state_ = PredatorPreyState{};
  state_.grid = config_.grid;
  for (int i = 0; i < config_.n_predators; ++i) state_.predators.push_back(cell_of(order[static_cast<std::size_t>(i)]));
  for (int i = 0; i < config_.n_prey; ++i)
    state_.prey.push_back(cell_of(order[static_cast<std::size_t>(config_.n_predators + i)]));
  state_.prey_alive.assign(static_cast<std::size_t>(config_.n_prey), true);
  state_.step = 0;
}

void PredatorPrey::set_state(PredatorPreyState s) {
  if (s.grid != config_.grid || static_cast<int>(s.predators.size()) != config_.n_predators ||
      static_cast<int>(s.prey.size()) != config_.n_prey || s.prey_alive.size() != s.prey.size())
    throw std::invalid_argument("predator-prey: state does not match configuration");
  state_ = std::move(s);
  check_invariants();
}

bool PredatorPrey::in_bounds(Cell c) const {
  return c.row >= 0 && c.row < config_.grid && c.col >= 0 && c.col < config_.grid;
}

bool PredatorPrey::occupied(Cell c) const {
  if (std::find(state_.predators.begin(), state_.predators.end(), c) != state_.predators.end()) return true;
  for (std::size_t i = 0; i < state_.prey.size(); ++i)
    if (state_.prey_alive[i] && state_.prey[i] == c) return true;
  return false;
}

void PredatorPrey::check_invariants() const {
  std::vector<Cell> all = state_.predators;
  for (std::size_t i = 0; i < state_.prey.size(); ++i)
    if (state_.prey_alive[i]) all.push_back(state_.prey[i]);
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!in_bounds(all[i])) throw std::logic_error("predator-prey: entity out of bounds");
    for (std::size_t j = i + 1; j < all.size(); ++j)
      if (all[i] == all[j]) throw std::logic_error("predator-prey: two entities share a cell");
  }
}

int PredatorPrey::prey_remaining() const {
  return static_cast<int>(std::count(state_.prey_alive.begin(), state_.prey_alive.end(), true));
}

StepResult PredatorPrey::step(std::span<const int> actions) {
  check_actions(actions);
  if (prey_remaining() == 0 || state_.step >= config_.episode_limit)
    throw std::logic_error("predator-prey: episode already finished; call reset()");

  // Movement, in agent-id order; blocked moves become stay.
  for (std::size_t i = 0; i < state_.predators.size(); ++i) {
    const int a = actions[i];
    if (a > kRight) continue;
    const Cell target = offset(state_.predators[i], kMoves[a]);
    if (in_bounds(target) && !occupied(target)) state_.predators[i] = target;
  }

  // Captures: each catching predator joins at most one capture.
  const std::size_t np = state_.predators.size();
  std::vector<bool> catching(np), used(np, false);
  for (std::size_t i = 0; i < np; ++i) catching[i] = actions[i] == kCatch;
  const std::vector<bool> alive_before = state_.prey_alive;
  float reward = 0.0f;
  for (std::size_t p = 0; p < state_.prey.size(); ++p) {
    if (!state_.prey_alive[p]) continue;
    std::vector<std::size_t> catchers;
    for (std::size_t i = 0; i < np; ++i)
      if (catching[i] && !used[i] && adjacent(state_.predators[i], state_.prey[p])) catchers.push_back(i);
    if (catchers.size() >= 2) {
      for (std::size_t i : catchers) used[i] = true;
      state_.prey_alive[p] = false;
      reward += config_.capture_reward;
    }
  }
  // A catch that joined no capture is penalised if it targeted a prey that
  // had no other catching predator next to it.
  for (std::size_t i = 0; i < np; ++i) {
    if (!catching[i] || used[i]) continue;
    for (std::size_t p = 0; p < state_.prey.size(); ++p) {
      if (!alive_before[p] || !adjacent(state_.predators[i], state_.prey[p])) continue;
      bool partner = false;
      for (std::size_t j = 0; j < np && !partner; ++j)
        partner = j != i && catching[j] && adjacent(state_.predators[j], state_.prey[p]);
      if (!partner) {
        reward += config_.miscapture_penalty;
        break;
      }
    }
  }

  // Surviving prey wander to a random free neighbouring cell.
  for (std::size_t p = 0; p < state_.prey.size(); ++p) {
    if (!state_.prey_alive[p]) continue;
    Cell options[4];
    int count = 0;
    for (const Cell& d : kMoves) {
      const Cell c = offset(state_.prey[p], d);
      if (in_bounds(c) && !occupied(c)) options[count++] = c;
    }
    if (count > 0) state_.prey[p] = options[uniform_int(rng_, count)];
  }

  ++state_.step;
  StepResult r;
  r.reward = reward;
  r.terminated = prey_remaining() == 0;
  r.truncated_by_limit = !r.terminated && state_.step >= config_.episode_limit;
  r.next_observations = observations();
  r.next_state = state();
  return r;
}

std::vector<float> PredatorPrey::observe(int agent) const {
  if (agent < 0 || agent >= config_.n_predators) throw std::out_of_range("invalid agent id " + std::to_string(agent));
  const int s = config_.sight;
  const int half = s / 2;
  std::vector<float> obs(static_cast<std::size_t>(kChannels * s * s), 0.0f);
  const Cell me = state_.predators[static_cast<std::size_t>(agent)];
  auto index = [&](int channel, int r, int c) { return static_cast<std::size_t>(channel * s * s + r * s + c); };
  for (int r = 0; r < s; ++r) {
    for (int c = 0; c < s; ++c) {
      const Cell cell{me.row + r - half, me.col + c - half};
      if (!in_bounds(cell)) obs[index(2, r, c)] = 1.0f;
    }
  }
  auto mark = [&](Cell e, int channel) {
    const int r = e.row - me.row + half;
    const int c = e.col - me.col + half;
    if (r >= 0 && r < s && c >= 0 && c < s) obs[index(channel, r, c)] = 1.0f;
  };
  for (const Cell& p : state_.predators) mark(p, 0);
  for (std::size_t i = 0; i < state_.prey.size(); ++i)
    if (state_.prey_alive[i]) mark(state_.prey[i], 1);
  return obs;
}

std::vector<float> PredatorPrey::state() const {
  std::vector<float> s;
  s.reserve(static_cast<std::size_t>(spec_.state_width));
  const float scale = config_.grid > 1 ? 1.0f / static_cast<float>(config_.grid - 1) : 1.0f;
  for (const Cell& c : state_.predators) {
    s.push_back(static_cast<float>(c.row) * scale);
    s.push_back(static_cast<float>(c.col) * scale);
  }
  for (std::size_t i = 0; i < state_.prey.size(); ++i) {
    const bool alive = state_.prey_alive[i];
    s.push_back(alive ? static_cast<float>(state_.prey[i].row) * scale : 0.0f);
    s.push_back(alive ? static_cast<float>(state_.prey[i].col) * scale : 0.0f);
  }
  for (bool alive : state_.prey_alive) s.push_back(alive ? 1.0f : 0.0f);
  return s;
}

}  // namespace hpf::envs
