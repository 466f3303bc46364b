#include "hpf/agents/utility_network.hpp"

#include <algorithm>
#include <stdexcept>

namespace hpf::agents {

using namespace hpf::ad;

int input_width(int obs_width, int n_agents, int n_actions) { return obs_width + n_agents + n_actions; }

void append_inputs(std::vector<float>& out, std::span<const float> observations, int obs_width, int n_agents,
                   int n_actions, std::span<const int> last_actions) {
  if (observations.size() != static_cast<std::size_t>(obs_width) * static_cast<std::size_t>(n_agents))
    throw std::invalid_argument("append_inputs: observation block has wrong size");
  if (!last_actions.empty() && static_cast<int>(last_actions.size()) != n_agents)
    throw std::invalid_argument("append_inputs: expected one last action per agent");
  for (int i = 0; i < n_agents; ++i) {
    const auto obs = observations.subspan(static_cast<std::size_t>(i * obs_width), static_cast<std::size_t>(obs_width));
    out.insert(out.end(), obs.begin(), obs.end());
    for (int k = 0; k < n_agents; ++k) out.push_back(k == i ? 1.0f : 0.0f);
    const int last = last_actions.empty() ? -1 : last_actions[static_cast<std::size_t>(i)];
    for (int a = 0; a < n_actions; ++a) out.push_back(a == last ? 1.0f : 0.0f);
  }
}

UtilityNetwork::UtilityNetwork(const std::string& name, int input_width, int n_actions, Rng& rng, int hidden)
    : encoder_(name + ".encoder", input_width, hidden, rng),
      gru_(name + ".gru", hidden, hidden, rng),
      head_(name + ".head", hidden, n_actions, rng) {}

UtilityNetwork::Output UtilityNetwork::forward(Graph& g, Var inputs, Var hidden) {
  if (inputs.shape().size() != 2 || inputs.shape()[1] != input_size())
    throw std::invalid_argument("utility network: expected input width " + std::to_string(input_size()) + ", got " +
                                shape_str(inputs.shape()));
  const Var x = relu(encoder_.forward(g, inputs));
  const Var h = gru_.forward(g, x, hidden);
  return {head_.forward(g, h), h};
}

Var UtilityNetwork::initial_hidden(Graph& g, int rows) const { return g.constant(Tensor({rows, hidden_size()})); }

std::vector<Parameter*> UtilityNetwork::parameters() {
  std::vector<Parameter*> out;
  encoder_.collect(out);
  gru_.collect(out);
  head_.collect(out);
  return out;
}

std::vector<const Parameter*> UtilityNetwork::parameters() const {
  std::vector<const Parameter*> out;
  encoder_.collect(out);
  gru_.collect(out);
  head_.collect(out);
  return out;
}

std::size_t UtilityNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->value.size();
  return n;
}

int greedy_action(std::span<const float> q) {
  if (q.empty()) throw std::invalid_argument("greedy_action: empty q-values");
  return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

int select_action(std::span<const float> q, float epsilon, Rng& rng) {
  if (q.empty()) throw std::invalid_argument("select_action: empty q-values");
  if (!(epsilon >= 0.0f && epsilon <= 1.0f)) throw std::invalid_argument("select_action: epsilon outside [0, 1]");
  if (epsilon > 0.0f && uniform01(rng) < epsilon) return uniform_int(rng, static_cast<int>(q.size()));
  return greedy_action(q);
}

float EpsilonSchedule::at(long step) const {
  if (step < 0) throw std::invalid_argument("epsilon schedule: negative step");
  if (mode == Mode::constant || anneal_steps <= 0) return mode == Mode::constant ? start : end;
  if (step >= anneal_steps) return end;
  const double frac = static_cast<double>(step) / static_cast<double>(anneal_steps);
  return static_cast<float>(start + (end - start) * frac);
}

}  // namespace hpf::agents
