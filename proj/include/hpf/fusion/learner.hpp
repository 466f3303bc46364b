#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hpf/agents/utility_network.hpp"
#include "hpf/autodiff/optim.hpp"
#include "hpf/mixers/mixers.hpp"
#include "hpf/replay/replay.hpp"

namespace hpf::fusion {

enum class Method { vdn, qmix, wqmix, qplex };

Method parse_method(const std::string& name);
std::string method_name(Method m);

/// One value-decomposition learner: a shared utility network, its mixing
/// head(s) and frozen target copies of all of them.
///
/// Restricted head: the IGM-consistent joint value used for acting (VDN sum,
/// QMIX, the QMIX head of WQMIX, the QPLEX head). Joint head: the learner's
/// best estimate of Q_jt (WQMIX's unrestricted MLP; the restricted head for
/// the other methods).
class Learner {
 public:
  struct Options {
    float wqmix_alpha = 0.1f;
    bool wqmix_weighted = true;
  };

  Learner(const std::string& name, Method method, const replay::EpisodeShape& shape, Rng& rng, Options opts);
  Learner(const std::string& name, Method method, const replay::EpisodeShape& shape, Rng& rng)
      : Learner(name, method, shape, rng, Options{}) {}

  Learner(const Learner&) = delete;
  Learner& operator=(const Learner&) = delete;

  Method method() const { return method_; }
  const std::string& name() const { return name_; }
  const replay::EpisodeShape& shape() const { return shape_; }
  int input_width() const;

  // --- acting -----------------------------------------------------------
  ad::Tensor initial_hidden() const;
  /// Utilities for all agents at one step (n_agents x n_actions, row-major);
  /// `inputs` holds one network input row per agent. Advances `hidden`.
  std::vector<float> utilities(std::span<const float> inputs, ad::Tensor& hidden);
  float restricted_value(std::span<const float> q, std::span<const int> actions, std::span<const float> state);
  float joint_value(std::span<const float> q, std::span<const int> actions, std::span<const float> state);

  // --- training ---------------------------------------------------------
  /// Utilities for every batch step 0..T: [(T+1)*B, n_agents, n_actions].
  ad::Var unroll(ad::Graph& g, const replay::EpisodeBatch& batch, bool target = false);
  /// Heads over rows of `q_all` (shape [rows, n, A]); `actions` has rows*n
  /// entries and `state` is [rows, state_width].
  ad::Var restricted_head(ad::Graph& g, ad::Var q_all, std::span<const int> actions, ad::Var state, bool target = false);
  ad::Var joint_head(ad::Graph& g, ad::Var q_all, std::span<const int> actions, ad::Var state, bool target = false);
  bool has_separate_joint_head() const { return method_ == Method::wqmix; }

  struct Targets {
    std::vector<float> y_tot;  // T*B
    std::vector<float> y_jt;   // T*B
  };
  /// Double-Q targets: next actions are the per-agent argmax of the online
  /// utilities `online_q` ([(T+1)*B, n, A]); the target networks evaluate them.
  Targets td_targets(const replay::EpisodeBatch& batch, const ad::Tensor& online_q, float gamma);

  struct TdLoss {
    std::optional<ad::Var> restricted;  // restricted-head squared TD error
    std::optional<ad::Var> joint;       // joint-head (weighted for WQMIX) squared TD error
    ad::Var total;
  };
  /// Masked TD losses of this learner for a batch given its online unroll.
  TdLoss td_loss(ad::Graph& g, const replay::EpisodeBatch& batch, ad::Var q_all, float gamma);

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
  std::vector<ad::Parameter*> target_parameters();
  void sync_targets();

  void set_optimizer(std::unique_ptr<ad::Optimizer> opt) { optimizer_ = std::move(opt); }
  /// Clips (if max_norm > 0), applies the optimizer and clears gradients.
  /// Returns the pre-clip gradient norm.
  float apply_gradients(float max_norm);

 private:
  struct Nets {
    agents::UtilityNetwork agent;
    mixers::QmixMixer qmix;
    mixers::UnrestrictedHead central;
    mixers::QplexMixer qplex;
  };
  Nets build(const std::string& prefix, Rng& rng) const;
  Nets& nets(bool target) { return target ? target_ : online_; }
  std::vector<ad::Parameter*> collect(Nets& n);
  std::vector<const ad::Parameter*> collect(const Nets& n) const;

  std::string name_;
  Method method_;
  replay::EpisodeShape shape_;
  Options opts_;
  Nets online_;
  Nets target_;
  std::unique_ptr<ad::Optimizer> optimizer_;
};

/// Network inputs for every agent and batch episode at step t:
/// [B * n_agents, input_width].
ad::Tensor batch_inputs(const replay::EpisodeBatch& batch, int t);

/// Per-agent argmax of rows of `q` ([rows, n, A]); ties to the lowest index.
std::vector<int> greedy_actions(const ad::Tensor& q, int row_begin, int rows);

/// sum(mask * weight * (pred - target)^2) / sum(mask); zero for an empty mask.
ad::Var masked_td_error(ad::Graph& g, ad::Var pred, std::span<const float> target, std::span<const float> mask,
                        std::span<const float> weight = {});

}  // namespace hpf::fusion
