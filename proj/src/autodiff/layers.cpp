#include "hpf/autodiff/layers.hpp"

#include <stdexcept>

#include "hpf/autodiff/optim.hpp"

namespace hpf::ad {

Linear::Linear(const std::string& name, int in, int out, std::mt19937_64& rng)
    : weight(name + ".weight", Tensor({in, out})), bias(name + ".bias", Tensor({out})) {
  init_uniform(weight, in, rng);
  init_uniform(bias, in, rng);
}

Var Linear::forward(Graph& g, Var x) {
  if (x.shape().back() != in_features()) {
    throw std::invalid_argument("linear " + weight.name + ": input width " + std::to_string(x.shape().back()) +
                                " does not match " + std::to_string(in_features()));
  }
  return add(matmul(x, g.param(weight)), g.param(bias));
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

void Linear::collect(std::vector<const Parameter*>& out) const {
  out.push_back(&weight);
  out.push_back(&bias);
}

GruCell::GruCell(const std::string& name, int in, int hidden, std::mt19937_64& rng)
    : input_weight(name + ".input_weight", Tensor({in, 3 * hidden})),
      hidden_weight(name + ".hidden_weight", Tensor({hidden, 3 * hidden})),
      input_bias(name + ".input_bias", Tensor({3 * hidden})),
      hidden_bias(name + ".hidden_bias", Tensor({3 * hidden})) {
  // PyTorch-style: every GRU tensor uses 1/sqrt(hidden).
  init_uniform(input_weight, hidden, rng);
  init_uniform(hidden_weight, hidden, rng);
  init_uniform(input_bias, hidden, rng);
  init_uniform(hidden_bias, hidden, rng);
}

Var GruCell::forward(Graph& g, Var x, Var h) {
  const int hs = hidden_size();
  if (x.shape().back() != input_size() || h.shape().back() != hs) {
    throw std::invalid_argument("gru " + input_weight.name + ": got input " + shape_str(x.shape()) + " and hidden " +
                                shape_str(h.shape()) + ", expected widths " + std::to_string(input_size()) + " and " +
                                std::to_string(hs));
  }
  return gru_cell(x, h, g.param(input_weight), g.param(hidden_weight), g.param(input_bias), g.param(hidden_bias));
}

void GruCell::collect(std::vector<Parameter*>& out) {
  out.insert(out.end(), {&input_weight, &hidden_weight, &input_bias, &hidden_bias});
}

void GruCell::collect(std::vector<const Parameter*>& out) const {
  out.insert(out.end(), {&input_weight, &hidden_weight, &input_bias, &hidden_bias});
}

void copy_values(const std::vector<const Parameter*>& src, const std::vector<Parameter*>& dst) {
  if (src.size() != dst.size()) throw std::invalid_argument("copy_values: parameter count mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i]->value.shape() != dst[i]->value.shape())
      throw std::invalid_argument("copy_values: shape mismatch for " + src[i]->name);
    dst[i]->value = src[i]->value;
  }
}

}  // namespace hpf::ad
