#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "hpf/autodiff/layers.hpp"
#include "hpf/random.hpp"

namespace hpf::agents {

/// Width of one agent's network input: observation, agent id one-hot and
/// last-action one-hot.
int input_width(int obs_width, int n_agents, int n_actions);

/// Appends the network input rows for all agents at one timestep.
/// `last_actions` is empty at episode start (all-zero one-hot).
void append_inputs(std::vector<float>& out, std::span<const float> observations, int obs_width, int n_agents,
                   int n_actions, std::span<const int> last_actions);

/// Recurrent per-agent utility Q_i(tau_i, .): Linear+ReLU encoder, GRU,
/// linear head. One instance is shared by all agents.
class UtilityNetwork {
 public:
  static constexpr int kHidden = 64;

  UtilityNetwork() = default;
  UtilityNetwork(const std::string& name, int input_width, int n_actions, Rng& rng, int hidden = kHidden);

  int input_size() const { return encoder_.in_features(); }
  int hidden_size() const { return gru_.hidden_size(); }
  int n_actions() const { return head_.out_features(); }

  struct Output {
    ad::Var q;       // [rows, n_actions]
    ad::Var hidden;  // [rows, hidden]
  };
  /// inputs: [rows, input_size], hidden: [rows, hidden_size]
  Output forward(ad::Graph& g, ad::Var inputs, ad::Var hidden);
  ad::Var initial_hidden(ad::Graph& g, int rows) const;

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
  std::size_t parameter_count() const;

 private:
  ad::Linear encoder_;
  ad::GruCell gru_;
  ad::Linear head_;
};

/// Epsilon-greedy over `q`; ties go to the lowest index.
int select_action(std::span<const float> q, float epsilon, Rng& rng);
int greedy_action(std::span<const float> q);

struct EpsilonSchedule {
  enum class Mode { linear_anneal, constant };
  float start = 1.0f;
  float end = 0.05f;
  long anneal_steps = 50000;
  Mode mode = Mode::linear_anneal;

  float at(long step) const;
};

}  // namespace hpf::agents
