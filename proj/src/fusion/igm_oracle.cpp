#include "hpf/fusion/igm_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hpf::fusion {

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

}  // namespace

int IgmOracleInstance::joint_count() const {
  int c = 1;
  for (int i = 0; i < n_agents; ++i) c *= n_actions;
  return c;
}

std::vector<int> IgmOracleInstance::decode(int joint) const {
  std::vector<int> u(sz(n_agents));
  for (int i = 0; i < n_agents; ++i, joint /= n_actions) u[sz(i)] = joint % n_actions;
  return u;
}

int IgmOracleInstance::encode(const std::vector<int>& actions) const {
  int j = 0;
  for (int i = n_agents - 1; i >= 0; --i) j = j * n_actions + actions[sz(i)];
  return j;
}

std::vector<int> IgmOracleInstance::greedy() const {
  std::vector<int> u(sz(n_agents));
  for (int i = 0; i < n_agents; ++i) {
    const auto row = utilities.begin() + i * n_actions;
    u[sz(i)] = static_cast<int>(std::max_element(row, row + n_actions) - row);
  }
  return u;
}

double IgmOracleInstance::q_jt(int joint) const {
  const auto k = sz(joint);
  return lambda * (q_tot1[k] + residual_mask[k] * residual[k]) + (1.0 - lambda) * q_tot2[k];
}

IgmOracleInstance random_igm_instance(Rng& rng, int max_agents, int max_actions) {
  IgmOracleInstance inst;
  inst.n_agents = 1 + uniform_int(rng, max_agents);
  inst.n_actions = 2 + uniform_int(rng, max_actions - 1);
  const int n = inst.n_agents, A = inst.n_actions, J = inst.joint_count();
  inst.utilities.resize(sz(n * A));
  for (double& q : inst.utilities) q = uniform(rng, -5.0, 5.0);
  inst.lambda = uniform01(rng);

  // Q_tot1: positive linear mix. Q_tot2: one hidden ELU layer, nonnegative weights.
  std::vector<double> w1(sz(n));
  for (double& w : w1) w = uniform(rng, 0.0, 2.0);
  const double c1 = uniform(rng, -3.0, 3.0);
  const int hidden = 4;
  std::vector<double> w2(sz(hidden * n)), b2(sz(hidden)), v2(sz(hidden));
  for (double& w : w2) w = uniform(rng, 0.0, 2.0);
  for (double& b : b2) b = uniform(rng, -2.0, 2.0);
  for (double& v : v2) v = uniform(rng, 0.0, 2.0);

  const std::vector<int> best = inst.greedy();
  for (int j = 0; j < J; ++j) {
    const std::vector<int> u = inst.decode(j);
    double t1 = c1;
    for (int i = 0; i < n; ++i) t1 += w1[sz(i)] * inst.utilities[sz(i * A + u[sz(i)])];
    double t2 = 0.0;
    for (int k = 0; k < hidden; ++k) {
      double z = b2[sz(k)];
      for (int i = 0; i < n; ++i) z += w2[sz(k * n + i)] * inst.utilities[sz(i * A + u[sz(i)])];
      t2 += v2[sz(k)] * (z > 0.0 ? z : std::expm1(z));
    }
    inst.q_tot1.push_back(t1);
    inst.q_tot2.push_back(t2);
    inst.residual.push_back(-uniform(rng, 0.0, 20.0));
    inst.residual_mask.push_back(u == best ? 0.0 : 1.0);
  }
  return inst;
}

void validate(const IgmOracleInstance& inst) {
  const auto fail = [](const std::string& m) { throw std::invalid_argument("invalid IGM instance: " + m); };
  if (inst.n_agents < 1 || inst.n_actions < 1) fail("empty game");
  const std::size_t J = sz(inst.joint_count());
  if (inst.utilities.size() != sz(inst.n_agents * inst.n_actions)) fail("utility table size");
  if (inst.q_tot1.size() != J || inst.q_tot2.size() != J || inst.residual.size() != J || inst.residual_mask.size() != J)
    fail("joint table size");
  if (!(inst.lambda >= 0.0 && inst.lambda <= 1.0)) fail("lambda outside [0, 1]");
  const std::vector<int> best = inst.greedy();
  for (std::size_t j = 0; j < J; ++j) {
    if (inst.residual[j] > 0.0) fail("positive residual");
    const bool at_best = inst.decode(static_cast<int>(j)) == best;
    if (inst.residual_mask[j] != (at_best ? 0.0 : 1.0)) fail("residual mask must be 0 exactly at the greedy tuple");
  }
  // Monotonicity: raising one agent's utility never lowers either table.
  for (int j = 0; j < inst.joint_count(); ++j) {
    const std::vector<int> u = inst.decode(j);
    for (int i = 0; i < inst.n_agents; ++i) {
      for (int a = 0; a < inst.n_actions; ++a) {
        if (inst.utilities[sz(i * inst.n_actions + a)] <= inst.utilities[sz(i * inst.n_actions + u[sz(i)])]) continue;
        std::vector<int> v = u;
        v[sz(i)] = a;
        const auto k = sz(inst.encode(v));
        if (inst.q_tot1[k] < inst.q_tot1[sz(j)] || inst.q_tot2[k] < inst.q_tot2[sz(j)]) fail("joint table not monotonic");
      }
    }
  }
}

bool igm_oracle_check(const IgmOracleInstance& inst) {
  validate(inst);
  const double at_greedy = inst.q_jt(inst.encode(inst.greedy()));
  for (int j = 0; j < inst.joint_count(); ++j)
    if (inst.q_jt(j) > at_greedy) return false;
  return true;
}

}  // namespace hpf::fusion
