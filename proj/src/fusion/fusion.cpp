#include "hpf/fusion/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hpf::fusion {

using namespace hpf::ad;

Estimator parse_estimator(const std::string& name) {
  if (name == "additive") return Estimator::additive;
  if (name == "optimistic") return Estimator::optimistic;
  throw std::invalid_argument("unknown estimator '" + name + "' (expected additive or optimistic)");
}

Sampler parse_sampler(const std::string& name) {
  if (name == "boltzmann") return Sampler::boltzmann;
  if (name == "random") return Sampler::random;
  throw std::invalid_argument("unknown sampler '" + name + "' (expected boltzmann or random)");
}

float estimate_policy_value(Learner& policy, std::span<const float> q, std::span<const float> state, Estimator mode) {
  const int n = policy.shape().n_agents, A = policy.shape().n_actions;
  if (q.size() != static_cast<std::size_t>(n * A)) throw std::invalid_argument("estimate_policy_value: wrong utility count");
  std::vector<int> greedy(static_cast<std::size_t>(n));
  float additive = 0.0f;
  for (int i = 0; i < n; ++i) {
    const auto row = q.subspan(static_cast<std::size_t>(i * A), static_cast<std::size_t>(A));
    const auto best = std::max_element(row.begin(), row.end());
    greedy[static_cast<std::size_t>(i)] = static_cast<int>(best - row.begin());
    additive += *best;
  }
  switch (mode) {
    case Estimator::additive: return additive;
    case Estimator::optimistic: return policy.joint_value(q, greedy, state);
  }
  throw std::invalid_argument("estimate_policy_value: unknown estimator");
}

std::array<double, 2> selection_probabilities(float value_alpha, float value_beta, float eta, Sampler mode) {
  if (!std::isfinite(value_alpha) || !std::isfinite(value_beta))
    throw std::invalid_argument("policy sampler: non-finite value estimate");
  if (mode == Sampler::random) return {0.5, 0.5};
  if (!(eta > 0.0f) || !std::isfinite(eta)) throw std::invalid_argument("policy sampler: temperature must be positive");
  const double a = static_cast<double>(value_alpha) / eta, b = static_cast<double>(value_beta) / eta;
  const double m = std::max(a, b);
  const double ea = std::exp(a - m), eb = std::exp(b - m);
  const double pa = ea / (ea + eb);
  return {pa, 1.0 - pa};
}

Selection sample_policy(float value_alpha, float value_beta, float eta, Sampler mode, Rng& rng) {
  const auto p = selection_probabilities(value_alpha, value_beta, eta, mode);
  return uniform01(rng) < p[0] ? Selection{1, 0} : Selection{0, 1};
}

std::vector<int> composite_act(std::span<const int> alpha_actions, std::span<const int> beta_actions, const Selection& w) {
  if (alpha_actions.size() != beta_actions.size()) throw std::invalid_argument("composite_act: joint actions differ in size");
  const bool pick_alpha = w[0] == 1 && w[1] == 0;
  if (!pick_alpha && !(w[0] == 0 && w[1] == 1)) throw std::invalid_argument("composite_act: selection is not one-hot");
  const auto src = pick_alpha ? alpha_actions : beta_actions;
  return {src.begin(), src.end()};
}

void SelectionRecord::record(const Selection& w) {
  if (w[0] + w[1] != 1 || std::min(w[0], w[1]) != 0) throw std::invalid_argument("selection record: w is not one-hot");
  ++counts_[w[0] == 1 ? 0 : 1];
}

double SelectionRecord::alpha_frequency() const {
  return total() == 0 ? 0.5 : static_cast<double>(counts_[0]) / static_cast<double>(total());
}

Var instructive_loss(Graph& g, Var q_alpha, Var q_beta, std::span<const float> mask, bool both_sides) {
  if (q_alpha.shape() != q_beta.shape() || q_alpha.shape().size() != 3)
    throw std::invalid_argument("instructive_loss: utilities " + shape_str(q_alpha.shape()) + " and " +
                                shape_str(q_beta.shape()) + " must both be [rows, agents, actions]");
  const int rows = q_alpha.shape()[0], n = q_alpha.shape()[1];
  if (mask.size() != static_cast<std::size_t>(rows)) throw std::invalid_argument("instructive_loss: mask size mismatch");
  double count = 0.0;
  std::vector<float> m(static_cast<std::size_t>(rows * n));
  for (int r = 0; r < rows; ++r) {
    count += mask[static_cast<std::size_t>(r)] * n;
    std::fill_n(m.begin() + r * n, n, mask[static_cast<std::size_t>(r)]);
  }
  if (count == 0.0) return g.constant(Tensor::scalar(0.0f));
  const Var qa = both_sides ? q_alpha : stop_gradient(q_alpha);
  const Var log_pa = log_softmax_over_axis(qa, 2);
  const Var kl = sum_axis(softmax_over_axis(qa, 2) * (log_pa - log_softmax_over_axis(q_beta, 2)), 2);
  return scale(sum(kl * g.constant(Tensor({rows, n}, std::move(m)))), static_cast<float>(1.0 / count));
}

TotalLoss total_loss(Graph& g, Learner& alpha, Learner& beta, const replay::EpisodeBatch& batch, const TrainOptions& opts) {
  if (beta.has_separate_joint_head() || beta.method() == Method::qplex)
    throw std::invalid_argument("total_loss: the constrained learner must be vdn or qmix");
  const Var qa = alpha.unroll(g, batch);
  const Var qb = beta.unroll(g, batch);
  const auto la = alpha.td_loss(g, batch, qa, opts.gamma);
  const auto lb = beta.td_loss(g, batch, qb, opts.gamma);
  TotalLoss out;
  out.total = la.total + lb.total;
  out.parts.td_tot = lb.total.item();
  out.parts.td_jt = la.total.item();
  if (opts.instructive) {
    const int rows = batch.max_length * batch.batch;
    const Var li = instructive_loss(g, slice(qa, 0, 0, rows), slice(qb, 0, 0, rows), batch.mask, opts.instructive_both_sides);
    out.total = out.total + li;
    out.parts.instructive = li.item();
  }
  out.parts.total = out.total.item();
  return out;
}

TotalLoss single_loss(Graph& g, Learner& learner, const replay::EpisodeBatch& batch, const TrainOptions& opts) {
  const Var q = learner.unroll(g, batch);
  const auto l = learner.td_loss(g, batch, q, opts.gamma);
  TotalLoss out{l.total, {}};
  if (l.restricted) out.parts.td_tot = l.restricted->item();
  if (l.joint) out.parts.td_jt = l.joint->item();
  out.parts.total = l.total.item();
  return out;
}

LossBreakdown train_step(Learner& alpha, Learner& beta, const replay::EpisodeBatch& batch, const TrainOptions& opts) {
  Graph g;
  const TotalLoss loss = total_loss(g, alpha, beta, batch, opts);
  g.backward(loss.total);
  alpha.apply_gradients(opts.grad_clip);
  beta.apply_gradients(opts.grad_clip);
  return loss.parts;
}

LossBreakdown train_step(Learner& learner, const replay::EpisodeBatch& batch, const TrainOptions& opts) {
  Graph g;
  const TotalLoss loss = single_loss(g, learner, batch, opts);
  g.backward(loss.total);
  learner.apply_gradients(opts.grad_clip);
  return loss.parts;
}

}  // namespace hpf::fusion
