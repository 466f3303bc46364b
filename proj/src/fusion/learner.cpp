#include "hpf/fusion/learner.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace hpf::fusion {

using namespace hpf::ad;

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

Tensor row_block(const std::vector<float>& data, int row_begin, int rows, int width) {
  const auto first = data.begin() + static_cast<std::ptrdiff_t>(sz(row_begin) * sz(width));
  return Tensor({rows, width}, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(sz(rows) * sz(width))));
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "vdn") return Method::vdn;
  if (name == "qmix") return Method::qmix;
  if (name == "wqmix") return Method::wqmix;
  if (name == "qplex") return Method::qplex;
  throw std::invalid_argument("unknown value-decomposition method '" + name + "'");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::vdn: return "vdn";
    case Method::qmix: return "qmix";
    case Method::wqmix: return "wqmix";
    case Method::qplex: return "qplex";
  }
  return "?";
}

Learner::Learner(const std::string& name, Method method, const replay::EpisodeShape& shape, Rng& rng, Options opts)
    : name_(name), method_(method), shape_(shape), opts_(opts) {
  if (shape.n_agents <= 0 || shape.n_actions <= 0 || shape.obs_width <= 0 || shape.state_width <= 0)
    throw std::invalid_argument("learner: non-positive environment shape");
  if (!(opts.wqmix_alpha > 0.0f && opts.wqmix_alpha <= 1.0f)) throw std::invalid_argument("learner: wqmix_alpha outside (0, 1]");
  online_ = build(name, rng);
  Rng scratch(0);
  target_ = build(name, scratch);
  sync_targets();
}

int Learner::input_width() const { return agents::input_width(shape_.obs_width, shape_.n_agents, shape_.n_actions); }

Learner::Nets Learner::build(const std::string& prefix, Rng& rng) const {
  Nets n;
  n.agent = agents::UtilityNetwork(prefix + ".agent", input_width(), shape_.n_actions, rng);
  if (method_ == Method::qmix || method_ == Method::wqmix)
    n.qmix = mixers::QmixMixer(prefix + ".qmix", shape_.n_agents, shape_.state_width, rng);
  if (method_ == Method::wqmix)
    n.central = mixers::UnrestrictedHead(prefix + ".central", shape_.n_agents, shape_.n_actions, shape_.state_width, rng);
  if (method_ == Method::qplex)
    n.qplex = mixers::QplexMixer(prefix + ".qplex", shape_.n_agents, shape_.n_actions, shape_.state_width, rng);
  return n;
}

std::vector<Parameter*> Learner::collect(Nets& n) {
  std::vector<Parameter*> out = n.agent.parameters();
  auto add = [&](std::vector<Parameter*> more) { out.insert(out.end(), more.begin(), more.end()); };
  if (method_ == Method::qmix || method_ == Method::wqmix) add(n.qmix.parameters());
  if (method_ == Method::wqmix) add(n.central.parameters());
  if (method_ == Method::qplex) add(n.qplex.parameters());
  return out;
}

std::vector<const Parameter*> Learner::collect(const Nets& n) const {
  std::vector<const Parameter*> out = n.agent.parameters();
  auto add = [&](std::vector<const Parameter*> more) { out.insert(out.end(), more.begin(), more.end()); };
  if (method_ == Method::qmix || method_ == Method::wqmix) add(n.qmix.parameters());
  if (method_ == Method::wqmix) add(n.central.parameters());
  if (method_ == Method::qplex) add(n.qplex.parameters());
  return out;
}

std::vector<Parameter*> Learner::parameters() { return collect(online_); }
std::vector<const Parameter*> Learner::parameters() const { return collect(online_); }
std::vector<Parameter*> Learner::target_parameters() { return collect(target_); }
void Learner::sync_targets() { copy_values(collect(std::as_const(online_)), collect(target_)); }

float Learner::apply_gradients(float max_norm) {
  if (!optimizer_) throw std::logic_error("learner " + name_ + ": no optimizer set");
  const auto params = parameters();
  const float norm = clip_grad_norm(params, max_norm);
  optimizer_->step(params);
  zero_grad(params);
  return norm;
}

Tensor Learner::initial_hidden() const { return Tensor({shape_.n_agents, online_.agent.hidden_size()}); }

std::vector<float> Learner::utilities(std::span<const float> inputs, Tensor& hidden) {
  const int n = shape_.n_agents;
  if (inputs.size() != sz(n) * sz(input_width())) throw std::invalid_argument("learner: wrong input block size");
  Graph g(false);
  const auto out = online_.agent.forward(g, g.constant(Tensor({n, input_width()}, std::vector<float>(inputs.begin(), inputs.end()))),
                                         g.constant(hidden));
  hidden = out.hidden.value();
  return out.q.value().storage();
}

float Learner::restricted_value(std::span<const float> q, std::span<const int> actions, std::span<const float> state) {
  Graph g(false);
  const Var qa = g.constant(Tensor({1, shape_.n_agents, shape_.n_actions}, std::vector<float>(q.begin(), q.end())));
  const Var s = g.constant(Tensor({1, shape_.state_width}, std::vector<float>(state.begin(), state.end())));
  return restricted_head(g, qa, actions, s).item();
}

float Learner::joint_value(std::span<const float> q, std::span<const int> actions, std::span<const float> state) {
  Graph g(false);
  const Var qa = g.constant(Tensor({1, shape_.n_agents, shape_.n_actions}, std::vector<float>(q.begin(), q.end())));
  const Var s = g.constant(Tensor({1, shape_.state_width}, std::vector<float>(state.begin(), state.end())));
  return joint_head(g, qa, actions, s).item();
}

Tensor batch_inputs(const replay::EpisodeBatch& batch, int t) {
  const auto& s = batch.shape;
  const int B = batch.batch, n = s.n_agents;
  const int width = agents::input_width(s.obs_width, n, s.n_actions);
  std::vector<float> data;
  data.reserve(sz(B) * sz(n) * sz(width));
  const std::size_t block = sz(n) * sz(s.obs_width);
  for (int b = 0; b < B; ++b) {
    const std::span<const float> obs(batch.observations.data() + (sz(t) * sz(B) + sz(b)) * block, block);
    std::span<const int> last;
    if (t > 0) last = std::span<const int>(batch.actions.data() + (sz(t - 1) * sz(B) + sz(b)) * sz(n), sz(n));
    agents::append_inputs(data, obs, s.obs_width, n, s.n_actions, last);
  }
  return Tensor({B * n, width}, std::move(data));
}

Var Learner::unroll(Graph& g, const replay::EpisodeBatch& batch, bool target) {
  if (!(batch.shape == shape_)) throw std::invalid_argument("learner " + name_ + ": batch shape mismatch");
  auto& net = nets(target).agent;
  const int T = batch.max_length, rows = batch.batch * shape_.n_agents;
  Var h = net.initial_hidden(g, rows);
  std::vector<Var> qs;
  qs.reserve(sz(T + 1));
  for (int t = 0; t <= T; ++t) {
    const auto out = net.forward(g, g.constant(batch_inputs(batch, t)), h);
    h = out.hidden;
    qs.push_back(out.q);
  }
  return reshape(concat(qs, 0), {(T + 1) * batch.batch, shape_.n_agents, shape_.n_actions});
}

Var Learner::restricted_head(Graph& g, Var q_all, std::span<const int> actions, Var state, bool target) {
  Nets& n = nets(target);
  if (method_ == Method::qplex) return n.qplex.forward(g, q_all, actions, state);
  const Var chosen = gather_along_axis(q_all, actions, 2);
  if (method_ == Method::vdn) return mixers::vdn_mix(chosen);
  return n.qmix.forward(g, chosen, state);
}

Var Learner::joint_head(Graph& g, Var q_all, std::span<const int> actions, Var state, bool target) {
  if (method_ != Method::wqmix) return restricted_head(g, q_all, actions, state, target);
  return nets(target).central.forward(g, gather_along_axis(q_all, actions, 2), state, actions);
}

std::vector<int> greedy_actions(const Tensor& q, int row_begin, int rows) {
  const int n = q.dim(1), A = q.dim(2);
  std::vector<int> out(sz(rows) * sz(n));
  const float* base = q.data().data() + sz(row_begin) * sz(n) * sz(A);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const float* row = base + k * sz(A);
    out[k] = static_cast<int>(std::max_element(row, row + A) - row);
  }
  return out;
}

Learner::Targets Learner::td_targets(const replay::EpisodeBatch& batch, const Tensor& online_q, float gamma) {
  const int T = batch.max_length, B = batch.batch;
  Graph g(false);
  const Var q_next = slice(unroll(g, batch, true), 0, B, T * B);
  const std::vector<int> next_actions = greedy_actions(online_q, B, T * B);
  const Var s_next = g.constant(row_block(batch.states, B, T * B, shape_.state_width));
  const Tensor v_tot = restricted_head(g, q_next, next_actions, s_next, true).value();
  const Tensor v_jt = has_separate_joint_head() ? joint_head(g, q_next, next_actions, s_next, true).value() : v_tot;
  Targets out;
  out.y_tot.resize(sz(T * B));
  out.y_jt.resize(sz(T * B));
  for (std::size_t k = 0; k < out.y_tot.size(); ++k) {
    const float keep = gamma * (1.0f - batch.terminated[k]);
    out.y_tot[k] = batch.rewards[k] + keep * v_tot[k];
    out.y_jt[k] = batch.rewards[k] + keep * v_jt[k];
  }
  return out;
}

Var masked_td_error(Graph& g, Var pred, std::span<const float> target, std::span<const float> mask,
                    std::span<const float> weight) {
  const std::size_t n = mask.size();
  if (pred.value().size() != n || target.size() != n || (!weight.empty() && weight.size() != n))
    throw std::invalid_argument("masked_td_error: size mismatch (prediction " + shape_str(pred.shape()) + ")");
  double count = 0.0;
  std::vector<float> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    count += mask[k];
    w[k] = mask[k] * (weight.empty() ? 1.0f : weight[k]);
  }
  if (count == 0.0) return g.constant(Tensor::scalar(0.0f));
  const Shape shape = pred.shape();
  const Var err = squared_error(pred, g.constant(Tensor(shape, std::vector<float>(target.begin(), target.end()))));
  return scale(sum(err * g.constant(Tensor(shape, std::move(w)))), static_cast<float>(1.0 / count));
}

Learner::TdLoss Learner::td_loss(Graph& g, const replay::EpisodeBatch& batch, Var q_all, float gamma) {
  const int T = batch.max_length, B = batch.batch;
  const Targets y = td_targets(batch, q_all.value(), gamma);
  const Var q_now = slice(q_all, 0, 0, T * B);
  const Var s_now = g.constant(row_block(batch.states, 0, T * B, shape_.state_width));
  TdLoss out;
  if (method_ == Method::qplex) {
    out.joint = masked_td_error(g, restricted_head(g, q_now, batch.actions, s_now), y.y_jt, batch.mask);
    out.total = *out.joint;
    return out;
  }
  const Var q_tot = restricted_head(g, q_now, batch.actions, s_now);
  out.restricted = masked_td_error(g, q_tot, y.y_tot, batch.mask);
  out.total = *out.restricted;
  if (method_ == Method::wqmix) {
    const Var q_jt = joint_head(g, q_now, batch.actions, s_now);
    std::vector<float> weight(sz(T * B), 1.0f);
    if (opts_.wqmix_weighted) {
      const std::vector<int> greedy = greedy_actions(q_all.value(), 0, T * B);
      const auto n = sz(shape_.n_agents);
      for (std::size_t k = 0; k < weight.size(); ++k) {
        const bool is_argmax = std::equal(greedy.begin() + static_cast<std::ptrdiff_t>(k * n),
                                          greedy.begin() + static_cast<std::ptrdiff_t>((k + 1) * n),
                                          batch.actions.begin() + static_cast<std::ptrdiff_t>(k * n));
        weight[k] = mixers::wqmix_weight(is_argmax, q_tot.value()[k], q_jt.value()[k], opts_.wqmix_alpha);
      }
    }
    out.joint = masked_td_error(g, q_jt, y.y_jt, batch.mask, weight);
    out.total = out.total + *out.joint;
  }
  return out;
}

}  // namespace hpf::fusion
