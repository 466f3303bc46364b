#pragma once

#include <vector>

#include "hpf/random.hpp"

namespace hpf::fusion {

/// A small joint game for checking that the fused joint value
///   Q_jt = lambda * (Q_tot1 + w_r * Q_r) + (1 - lambda) * Q_tot2
/// keeps the per-agent greedy tuple as its argmax. Joint tables are indexed
/// by sum_i u_i * A^i.
struct IgmOracleInstance {
  int n_agents = 0;
  int n_actions = 0;
  std::vector<double> utilities;      // n_agents x n_actions
  std::vector<double> q_tot1;         // monotonic in the utilities
  std::vector<double> q_tot2;         // monotonic in the utilities
  std::vector<double> residual;       // Q_r <= 0
  std::vector<double> residual_mask;  // 0 at the greedy tuple, 1 elsewhere
  double lambda = 0.0;

  int joint_count() const;
  std::vector<int> decode(int joint) const;
  std::vector<int> greedy() const;
  int encode(const std::vector<int>& actions) const;
  double q_jt(int joint) const;
};

/// Random valid instance: n in [1, max_agents], |U| in [2, max_actions].
IgmOracleInstance random_igm_instance(Rng& rng, int max_agents = 3, int max_actions = 4);

/// Throws std::invalid_argument when an instance invariant is broken.
void validate(const IgmOracleInstance& inst);

/// True iff the per-agent greedy tuple attains the maximum of Q_jt over all
/// joint actions (checked by enumeration).
bool igm_oracle_check(const IgmOracleInstance& inst);

}  // namespace hpf::fusion
