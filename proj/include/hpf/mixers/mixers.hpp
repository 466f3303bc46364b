#pragma once

#include <span>
#include <string>
#include <vector>

#include "hpf/autodiff/layers.hpp"
#include "hpf/random.hpp"

namespace hpf::mixers {

// Row conventions: `chosen` is [rows, n_agents] (utility of each agent's
// action), `q_all` is [rows, n_agents, n_actions], `state` is [rows, state]
// and `actions` holds rows*n_agents indices. Every mixer returns [rows].

/// Q_tot = sum_i Q_i.
ad::Var vdn_mix(ad::Var chosen);

/// Monotonic mixing network: hypernetworks produce |W1| [n, embed], b1,
/// |W2| [embed, 1] and a two-layer state bias V(s).
class QmixMixer {
 public:
  static constexpr int kEmbed = 32;

  QmixMixer() = default;
  QmixMixer(const std::string& name, int n_agents, int state_width, Rng& rng, int embed = kEmbed);

  ad::Var forward(ad::Graph& g, ad::Var chosen, ad::Var state);
  /// The absolute first- and second-layer weights for one state row.
  std::vector<float> layer_weights(std::span<const float> state);

  int n_agents() const { return n_agents_; }
  int embed() const { return embed_; }
  ad::Linear& hyper_w1() { return hyper_w1_; }
  ad::Linear& hyper_b1() { return hyper_b1_; }
  ad::Linear& hyper_w2() { return hyper_w2_; }
  ad::Linear& value_hidden() { return value_hidden_; }
  ad::Linear& value_out() { return value_out_; }

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

 private:
  int n_agents_ = 0;
  int embed_ = 0;
  ad::Linear hyper_w1_, hyper_b1_, hyper_w2_, value_hidden_, value_out_;
};

/// Unconstrained joint value Q_jt: MLP over the chosen utilities, the state
/// and the joint-action one-hot, two hidden layers of 64.
class UnrestrictedHead {
 public:
  static constexpr int kHidden = 64;

  UnrestrictedHead() = default;
  UnrestrictedHead(const std::string& name, int n_agents, int n_actions, int state_width, Rng& rng,
                   int hidden = kHidden);

  ad::Var forward(ad::Graph& g, ad::Var chosen, ad::Var state, std::span<const int> actions);

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

 private:
  int n_agents_ = 0;
  int n_actions_ = 0;
  ad::Linear l1_, l2_, l3_;
};

/// Weight on a sample's unrestricted TD error: 1 for the restricted greedy
/// joint action or an underestimate (q_tot < q_jt), `alpha` otherwise.
float wqmix_weight(bool is_argmax, float q_tot, float q_jt, float alpha);

/// Duplex dueling head:
///   Q = sum_i w_i(s) V_i + b(s) + sum_i lambda_i(s, u) A_i
/// with V_i = max Q_i, A_i = Q_i(u_i) - V_i <= 0, w_i = |.| and
/// lambda_i = 1 + elu(.) > 0.
class QplexMixer {
 public:
  static constexpr int kHidden = 64;

  QplexMixer() = default;
  QplexMixer(const std::string& name, int n_agents, int n_actions, int state_width, Rng& rng, int hidden = kHidden);

  ad::Var forward(ad::Graph& g, ad::Var q_all, std::span<const int> actions, ad::Var state);
  /// lambda_i for each row: [rows, n_agents].
  ad::Var lambdas(ad::Graph& g, ad::Var state, std::span<const int> actions);

  ad::Linear& value_weight() { return value_weight_; }
  ad::Linear& value_bias() { return value_bias_; }
  ad::Linear& lambda_hidden() { return lambda_hidden_; }
  ad::Linear& lambda_out() { return lambda_out_; }

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

 private:
  int n_agents_ = 0;
  int n_actions_ = 0;
  ad::Linear value_weight_, value_bias_, lambda_hidden_, lambda_out_;
};

/// Joint-action one-hot rows [rows, n_agents * n_actions].
ad::Tensor joint_action_one_hot(std::span<const int> actions, int n_agents, int n_actions);

}  // namespace hpf::mixers
