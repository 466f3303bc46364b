#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hpf/fusion/learner.hpp"

namespace hpf::fusion {

enum class Estimator { additive, optimistic };
enum class Sampler { boltzmann, random };

Estimator parse_estimator(const std::string& name);
Sampler parse_sampler(const std::string& name);

/// Value of acting with `policy` now. Additive: sum of per-agent maximal
/// utilities. Optimistic: the joint head at the per-agent greedy actions.
float estimate_policy_value(Learner& policy, std::span<const float> q, std::span<const float> state, Estimator mode);

/// P[k] proportional to exp(value_k / eta), or (0.5, 0.5) for the random sampler.
std::array<double, 2> selection_probabilities(float value_alpha, float value_beta, float eta, Sampler mode);

using Selection = std::array<int, 2>;  // one-hot w over (alpha, beta)

Selection sample_policy(float value_alpha, float value_beta, float eta, Sampler mode, Rng& rng);

/// The joint action of the policy picked by `w`.
std::vector<int> composite_act(std::span<const int> alpha_actions, std::span<const int> beta_actions, const Selection& w);

/// Running count of which policy acted.
class SelectionRecord {
 public:
  void record(const Selection& w);
  std::uint64_t count(int policy) const { return counts_[static_cast<std::size_t>(policy)]; }
  std::uint64_t total() const { return counts_[0] + counts_[1]; }
  /// Fraction of alpha selections; 0.5 before any record.
  double alpha_frequency() const;
  void reset() { counts_ = {0, 0}; }

 private:
  std::array<std::uint64_t, 2> counts_{0, 0};
};

/// Mean over valid (row, agent) of KL(softmax q_alpha || softmax q_beta).
/// q_* are [rows, n, A]; `mask` has one entry per row. Unless `both_sides`,
/// the alpha side is treated as a constant.
ad::Var instructive_loss(ad::Graph& g, ad::Var q_alpha, ad::Var q_beta, std::span<const float> mask,
                         bool both_sides = false);

struct LossBreakdown {
  float total = 0.0f;
  float td_tot = 0.0f;       // restricted-head TD of the constrained (or single) learner
  float td_jt = 0.0f;        // TD terms of the surrogate-target learner (joint head of a single learner)
  float instructive = 0.0f;  // L_I
};

struct TrainOptions {
  float gamma = 0.99f;
  float grad_clip = 10.0f;
  bool instructive = true;
  bool instructive_both_sides = false;
};

struct TotalLoss {
  ad::Var total;
  LossBreakdown parts;
};

/// L = L_TD^tot(beta) + L_TD^jt(alpha) + L_I on one graph.
TotalLoss total_loss(ad::Graph& g, Learner& alpha, Learner& beta, const replay::EpisodeBatch& batch,
                     const TrainOptions& opts);
TotalLoss single_loss(ad::Graph& g, Learner& learner, const replay::EpisodeBatch& batch, const TrainOptions& opts);

/// One gradient step on both learners (alpha's optimizer runs first).
LossBreakdown train_step(Learner& alpha, Learner& beta, const replay::EpisodeBatch& batch, const TrainOptions& opts);
LossBreakdown train_step(Learner& learner, const replay::EpisodeBatch& batch, const TrainOptions& opts);

}  // namespace hpf::fusion
