#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "hpf/mixers/mixers.hpp"

using namespace hpf;
using namespace hpf::ad;
using namespace hpf::mixers;

namespace {

Tensor uniform_tensor(Shape shape, Rng& rng, float lo = -2.0f, float hi = 2.0f) {
  Tensor t(std::move(shape));
  for (float& x : t.data()) x = lo + static_cast<float>(uniform01(rng)) * (hi - lo);
  return t;
}

void fill(Parameter& p, float v) { std::fill(p.value.data().begin(), p.value.data().end(), v); }

}  // namespace

TEST_CASE("vdn") {
  Graph g;
  Parameter q("q", Tensor::from({1, 3}, {1, 2, 3}));
  const Var out = vdn_mix(g.param(q));
  CHECK(out.item() == 6.0f);
  g.backward(sum(out));
  CHECK(q.grad == std::vector<float>{1, 1, 1});
  Graph z(false);
  CHECK(vdn_mix(z.constant(Tensor({1, 2}))).item() == 0.0f);
}

TEST_CASE("qmix reduces to a sum with identity weights") {
  Rng rng(1);
  QmixMixer m("mix", 3, 4, rng);
  for (Parameter* p : m.parameters()) fill(*p, 0.0f);
  // |W1| routes every agent into unit 0, |W2| reads unit 0.
  for (int i = 0; i < 3; ++i) m.hyper_w1().bias.value[static_cast<std::size_t>(i * m.embed())] = 1.0f;
  m.hyper_w2().bias.value[0] = 1.0f;
  Graph g(false);
  const Var out = m.forward(g, g.constant(Tensor::from({2, 3}, {1, 2, 3, 0.5f, 0.25f, 4})), g.constant(uniform_tensor({2, 4}, rng)));
  CHECK(out.value()[0] == doctest::Approx(6.0f));
  CHECK(out.value()[1] == doctest::Approx(4.75f));
}

TEST_CASE("qmix is monotonic and weights are nonnegative") {
  Rng rng(2);
  QmixMixer m("mix", 3, 5, rng);
  int violations = 0;
  for (int probe = 0; probe < 1000; ++probe) {
    const Tensor s = uniform_tensor({1, 5}, rng);
    const Tensor q = uniform_tensor({1, 3}, rng, -10.0f, 10.0f);
    for (float w : m.layer_weights(s.data())) CHECK(w >= 0.0f);
    Graph g(false);
    const float base = m.forward(g, g.constant(q), g.constant(s)).item();
    for (int i = 0; i < 3; ++i) {
      for (float d : {1e-2f, 1.0f}) {
        Tensor up = q;
        up[static_cast<std::size_t>(i)] += d;
        violations += m.forward(g, g.constant(up), g.constant(s)).item() < base;
      }
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("qmix is symmetric for equal utilities under fixed weights") {
  Rng rng(3);
  QmixMixer m("mix", 3, 2, rng);
  // Make the hypernetworks state independent and agent symmetric.
  fill(m.hyper_w1().weight, 0.0f);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < m.embed(); ++k)
      m.hyper_w1().bias.value[static_cast<std::size_t>(i * m.embed() + k)] = m.hyper_w1().bias.value[static_cast<std::size_t>(k)];
  Graph g(false);
  const Tensor s = uniform_tensor({1, 2}, rng);
  const float a = m.forward(g, g.constant(Tensor::from({1, 3}, {1.5f, -0.5f, 2.0f})), g.constant(s)).item();
  const float b = m.forward(g, g.constant(Tensor::from({1, 3}, {2.0f, 1.5f, -0.5f})), g.constant(s)).item();
  CHECK(a == doctest::Approx(b).epsilon(1e-6));
}

TEST_CASE("wqmix weight truth table") {
  CHECK(wqmix_weight(true, 5.0f, 2.0f, 0.1f) == 1.0f);
  CHECK(wqmix_weight(true, 2.0f, 5.0f, 0.1f) == 1.0f);
  CHECK(wqmix_weight(false, 2.0f, 5.0f, 0.1f) == 1.0f);
  CHECK(wqmix_weight(false, 5.0f, 2.0f, 0.1f) == 0.1f);
  CHECK(wqmix_weight(false, 2.0f, 2.0f, 0.1f) == 0.1f);
  CHECK_THROWS_AS(wqmix_weight(false, 0, 0, 0.0f), std::invalid_argument);
}

TEST_CASE("unrestricted head distinguishes joint actions") {
  Rng rng(4);
  UnrestrictedHead h("jt", 2, 3, 2, rng);
  Graph g(false);
  const Var q = g.constant(Tensor::from({2, 2}, {1, 1, 1, 1}));
  const Var s = g.constant(Tensor::from({2, 2}, {1, 1, 1, 1}));
  const std::vector<int> acts{0, 0, 1, 1};
  const Var out = h.forward(g, q, s, acts);
  CHECK(out.shape() == Shape{2});
  CHECK(out.value()[0] != out.value()[1]);
}

TEST_CASE("qplex dueling properties") {
  Rng rng(5);
  const int n = 3, A = 4, S = 3;
  QplexMixer m("qplex", n, A, S, rng);

  SUBCASE("lambda positive") {
    for (int k = 0; k < 1000; ++k) {
      Graph g(false);
      std::vector<int> acts(n);
      for (int& a : acts) a = uniform_int(rng, A);
      const Var l = m.lambdas(g, g.constant(uniform_tensor({1, S}, rng, -5.0f, 5.0f)), acts);
      for (float v : l.value().data()) CHECK(v > 0.0f);
    }
  }
  SUBCASE("argmax joint action strictly dominates") {
    for (int k = 0; k < 200; ++k) {
      Graph g(false);
      const Tensor q = uniform_tensor({1, n, A}, rng);
      const Var s = g.constant(uniform_tensor({1, S}, rng));
      std::vector<int> greedy(n);
      for (int i = 0; i < n; ++i) {
        auto row = q.data().subspan(static_cast<std::size_t>(i * A), static_cast<std::size_t>(A));
        greedy[static_cast<std::size_t>(i)] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      }
      const float best = m.forward(g, g.constant(q), greedy, s).item();
      // Advantage term vanishes at the argmax.
      const Var w = abs(m.value_weight().forward(g, s));
      float v_tot = m.value_bias().forward(g, s).item();
      for (int i = 0; i < n; ++i)
        v_tot += w.value()[static_cast<std::size_t>(i)] * q[static_cast<std::size_t>(i * A + greedy[static_cast<std::size_t>(i)])];
      CHECK(best == doctest::Approx(v_tot).epsilon(1e-5));
      std::vector<int> other = greedy;
      other[0] = (other[0] + 1 + uniform_int(rng, A - 1)) % A;
      CHECK(m.forward(g, g.constant(q), other, s).item() < best);
    }
  }
  SUBCASE("single agent identity") {
    QplexMixer one("one", 1, 3, 1, rng);
    for (Parameter* p : one.parameters()) fill(*p, 0.0f);
    one.value_weight().bias.value[0] = 1.0f;  // |w| = 1, b = 0, lambda = 1 + elu(0) = 1
    Graph g(false);
    const Tensor q = Tensor::from({1, 1, 3}, {0.5f, 2.0f, -1.0f});
    for (int a = 0; a < 3; ++a) {
      const int act[1] = {a};
      CHECK(one.forward(g, g.constant(q), act, g.constant(Tensor({1, 1}))).item() == doctest::Approx(q[static_cast<std::size_t>(a)]));
    }
  }
}

TEST_CASE("IGM by enumeration for vdn, qmix and qplex") {
  Rng rng(6);
  int violations = 0;
  for (int draw = 0; draw < 1000; ++draw) {
    const int n = 1 + uniform_int(rng, 3), A = 2 + uniform_int(rng, 3), S = 2;
    QmixMixer qmix("qmix", n, S, rng, 8);
    QplexMixer qplex("qplex", n, A, S, rng, 8);
    const Tensor q = uniform_tensor({1, n, A}, rng);
    const Tensor s = uniform_tensor({1, S}, rng);
    int joint = 1;
    for (int i = 0; i < n; ++i) joint *= A;
    std::vector<int> greedy(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      auto row = q.data().subspan(static_cast<std::size_t>(i * A), static_cast<std::size_t>(A));
      greedy[static_cast<std::size_t>(i)] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    // All joint actions in one batch.
    std::vector<int> acts;
    std::vector<float> chosen, states, qs;
    for (int j = 0; j < joint; ++j) {
      int rest = j;
      for (int i = 0; i < n; ++i) {
        const int a = rest % A;
        rest /= A;
        acts.push_back(a);
        chosen.push_back(q[static_cast<std::size_t>(i * A + a)]);
      }
      states.insert(states.end(), s.data().begin(), s.data().end());
      qs.insert(qs.end(), q.data().begin(), q.data().end());
    }
    Graph g(false);
    const Var c = g.constant(Tensor({joint, n}, chosen));
    const Var st = g.constant(Tensor({joint, S}, states));
    for (Var out : {vdn_mix(c), qmix.forward(g, c, st), qplex.forward(g, g.constant(Tensor({joint, n, A}, qs)), acts, st)}) {
      const auto v = out.value().data();
      const int best = static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
      const float greedy_value = [&] {
        for (int j = 0; j < joint; ++j)
          if (std::equal(greedy.begin(), greedy.end(), acts.begin() + j * n)) return v[static_cast<std::size_t>(j)];
        return NAN;
      }();
      // Ties in float are allowed; the greedy tuple must attain the maximum.
      violations += greedy_value < v[static_cast<std::size_t>(best)];
    }
  }
  CHECK(violations == 0);
}
