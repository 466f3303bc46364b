#include "hpf/mixers/mixers.hpp"

#include <stdexcept>

namespace hpf::mixers {

using namespace hpf::ad;

namespace {

int rows_of(Var v, int width, const char* what) {
  if (v.shape().size() != 2 || v.shape()[1] != width)
    throw std::invalid_argument(std::string(what) + ": expected [rows, " + std::to_string(width) + "], got " +
                                shape_str(v.shape()));
  return v.shape()[0];
}

void collect_all(std::vector<Parameter*>& out, std::initializer_list<Linear*> layers) {
  for (Linear* l : layers) l->collect(out);
}

void collect_all(std::vector<const Parameter*>& out, std::initializer_list<const Linear*> layers) {
  for (const Linear* l : layers) l->collect(out);
}

}  // namespace

Tensor joint_action_one_hot(std::span<const int> actions, int n_agents, int n_actions) {
  if (actions.size() % static_cast<std::size_t>(n_agents) != 0)
    throw std::invalid_argument("joint_action_one_hot: action count not a multiple of n_agents");
  const int rows = static_cast<int>(actions.size()) / n_agents;
  Tensor t({rows, n_agents * n_actions});
  for (std::size_t k = 0; k < actions.size(); ++k) {
    const int a = actions[k];
    if (a < 0 || a >= n_actions) throw std::out_of_range("joint_action_one_hot: action out of range");
    t[k * static_cast<std::size_t>(n_actions) + static_cast<std::size_t>(a)] = 1.0f;
  }
  return t;
}

Var vdn_mix(Var chosen) {
  if (chosen.shape().size() != 2) throw std::invalid_argument("vdn_mix: expected [rows, n_agents], got " + shape_str(chosen.shape()));
  return sum_axis(chosen, 1);
}

QmixMixer::QmixMixer(const std::string& name, int n_agents, int state_width, Rng& rng, int embed)
    : n_agents_(n_agents),
      embed_(embed),
      hyper_w1_(name + ".hyper_w1", state_width, n_agents * embed, rng),
      hyper_b1_(name + ".hyper_b1", state_width, embed, rng),
      hyper_w2_(name + ".hyper_w2", state_width, embed, rng),
      value_hidden_(name + ".value_hidden", state_width, embed, rng),
      value_out_(name + ".value_out", embed, 1, rng) {}

Var QmixMixer::forward(Graph& g, Var chosen, Var state) {
  const int rows = rows_of(chosen, n_agents_, "qmix chosen utilities");
  if (rows_of(state, hyper_w1_.in_features(), "qmix state") != rows)
    throw std::invalid_argument("qmix: utilities and state disagree on rows");
  const Var w1 = reshape(abs(hyper_w1_.forward(g, state)), {rows, n_agents_, embed_});
  const Var b1 = reshape(hyper_b1_.forward(g, state), {rows, 1, embed_});
  const Var hidden = elu(matmul(reshape(chosen, {rows, 1, n_agents_}), w1) + b1);
  const Var w2 = reshape(abs(hyper_w2_.forward(g, state)), {rows, embed_, 1});
  const Var v = value_out_.forward(g, relu(value_hidden_.forward(g, state)));
  return reshape(matmul(hidden, w2), {rows}) + reshape(v, {rows});
}

std::vector<float> QmixMixer::layer_weights(std::span<const float> state) {
  Graph g(false);
  const Var s = g.constant(Tensor({1, static_cast<int>(state.size())}, std::vector<float>(state.begin(), state.end())));
  std::vector<float> out;
  for (Var w : {abs(hyper_w1_.forward(g, s)), abs(hyper_w2_.forward(g, s))})
    out.insert(out.end(), w.value().data().begin(), w.value().data().end());
  return out;
}

std::vector<Parameter*> QmixMixer::parameters() {
  std::vector<Parameter*> out;
  collect_all(out, {&hyper_w1_, &hyper_b1_, &hyper_w2_, &value_hidden_, &value_out_});
  return out;
}

std::vector<const Parameter*> QmixMixer::parameters() const {
  std::vector<const Parameter*> out;
  collect_all(out, {&hyper_w1_, &hyper_b1_, &hyper_w2_, &value_hidden_, &value_out_});
  return out;
}

UnrestrictedHead::UnrestrictedHead(const std::string& name, int n_agents, int n_actions, int state_width, Rng& rng,
                                   int hidden)
    : n_agents_(n_agents),
      n_actions_(n_actions),
      l1_(name + ".l1", n_agents + state_width + n_agents * n_actions, hidden, rng),
      l2_(name + ".l2", hidden, hidden, rng),
      l3_(name + ".l3", hidden, 1, rng) {}

Var UnrestrictedHead::forward(Graph& g, Var chosen, Var state, std::span<const int> actions) {
  const int rows = rows_of(chosen, n_agents_, "unrestricted head utilities");
  if (state.shape().size() != 2 || state.shape()[0] != rows)
    throw std::invalid_argument("unrestricted head: state rows " + shape_str(state.shape()) + " vs utilities " +
                                shape_str(chosen.shape()));
  const Var onehot = g.constant(joint_action_one_hot(actions, n_agents_, n_actions_));
  if (onehot.shape()[0] != rows) throw std::invalid_argument("unrestricted head: action rows mismatch");
  const Var parts[3] = {chosen, state, onehot};
  const Var x = concat(parts, 1);
  const Var h = relu(l2_.forward(g, relu(l1_.forward(g, x))));
  return reshape(l3_.forward(g, h), {rows});
}

std::vector<Parameter*> UnrestrictedHead::parameters() {
  std::vector<Parameter*> out;
  collect_all(out, {&l1_, &l2_, &l3_});
  return out;
}

std::vector<const Parameter*> UnrestrictedHead::parameters() const {
  std::vector<const Parameter*> out;
  collect_all(out, {&l1_, &l2_, &l3_});
  return out;
}

float wqmix_weight(bool is_argmax, float q_tot, float q_jt, float alpha) {
  if (!(alpha > 0.0f && alpha <= 1.0f)) throw std::invalid_argument("wqmix_weight: alpha outside (0, 1]");
  return (is_argmax || q_tot < q_jt) ? 1.0f : alpha;
}

QplexMixer::QplexMixer(const std::string& name, int n_agents, int n_actions, int state_width, Rng& rng, int hidden)
    : n_agents_(n_agents),
      n_actions_(n_actions),
      value_weight_(name + ".value_weight", state_width, n_agents, rng),
      value_bias_(name + ".value_bias", state_width, 1, rng),
      lambda_hidden_(name + ".lambda_hidden", state_width + n_agents * n_actions, hidden, rng),
      lambda_out_(name + ".lambda_out", hidden, n_agents, rng) {}

Var QplexMixer::lambdas(Graph& g, Var state, std::span<const int> actions) {
  const Var onehot = g.constant(joint_action_one_hot(actions, n_agents_, n_actions_));
  if (state.shape().size() != 2 || onehot.shape()[0] != state.shape()[0])
    throw std::invalid_argument("qplex: state " + shape_str(state.shape()) + " vs actions " + shape_str(onehot.shape()));
  const Var parts[2] = {state, onehot};
  return add_scalar(elu(lambda_out_.forward(g, relu(lambda_hidden_.forward(g, concat(parts, 1))))), 1.0f);
}

Var QplexMixer::forward(Graph& g, Var q_all, std::span<const int> actions, Var state) {
  if (q_all.shape().size() != 3 || q_all.shape()[1] != n_agents_ || q_all.shape()[2] != n_actions_)
    throw std::invalid_argument("qplex: expected utilities [rows, " + std::to_string(n_agents_) + ", " +
                                std::to_string(n_actions_) + "], got " + shape_str(q_all.shape()));
  const int rows = q_all.shape()[0];
  if (static_cast<int>(actions.size()) != rows * n_agents_) throw std::invalid_argument("qplex: action count mismatch");
  const Var v = max_over_axis(q_all, 2);
  const Var advantage = gather_along_axis(q_all, actions, 2) - v;
  const Var w = abs(value_weight_.forward(g, state));
  const Var v_tot = sum_axis(w * v, 1) + reshape(value_bias_.forward(g, state), {rows});
  const Var a_tot = sum_axis(lambdas(g, state, actions) * advantage, 1);
  return v_tot + a_tot;
}

std::vector<Parameter*> QplexMixer::parameters() {
  std::vector<Parameter*> out;
  collect_all(out, {&value_weight_, &value_bias_, &lambda_hidden_, &lambda_out_});
  return out;
}

std::vector<const Parameter*> QplexMixer::parameters() const {
  std::vector<const Parameter*> out;
  collect_all(out, {&value_weight_, &value_bias_, &lambda_hidden_, &lambda_out_});
  return out;
}

}  // namespace hpf::mixers
