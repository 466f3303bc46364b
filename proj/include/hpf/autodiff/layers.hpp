#pragma once

#include <random>
#include <string>
#include <vector>

#include "hpf/autodiff/graph.hpp"

namespace hpf::ad {

/// y = x W + b, with W stored [in, out].
struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  Linear(const std::string& name, int in, int out, std::mt19937_64& rng);

  int in_features() const { return weight.value.dim(0); }
  int out_features() const { return weight.value.dim(1); }
  Var forward(Graph& g, Var x);
  void collect(std::vector<Parameter*>& out);
  void collect(std::vector<const Parameter*>& out) const;
};

/// Gated recurrent unit with gate layout [reset | update | candidate]:
///   r  = sigmoid(x Wr + h Ur + br)
///   z  = sigmoid(x Wz + h Uz + bz)
///   n  = tanh(x Wn + bn_x + r * (h Un + bn_h))
///   h' = (1 - z) * h + z * n
struct GruCell {
  Parameter input_weight;   // [in, 3*hidden]
  Parameter hidden_weight;  // [hidden, 3*hidden]
  Parameter input_bias;     // [3*hidden]
  Parameter hidden_bias;    // [3*hidden]

  GruCell() = default;
  GruCell(const std::string& name, int in, int hidden, std::mt19937_64& rng);

  int input_size() const { return input_weight.value.dim(0); }
  int hidden_size() const { return hidden_weight.value.dim(0); }
  /// x: [rows, in], h: [rows, hidden] -> [rows, hidden]
  Var forward(Graph& g, Var x, Var h);
  void collect(std::vector<Parameter*>& out);
  void collect(std::vector<const Parameter*>& out) const;
};

/// Copies parameter values from `src` to `dst` (same order, same shapes).
void copy_values(const std::vector<const Parameter*>& src, const std::vector<Parameter*>& dst);

}  // namespace hpf::ad
