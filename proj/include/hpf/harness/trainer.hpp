#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hpf/agents/utility_network.hpp"
#include "hpf/envs/environment.hpp"
#include "hpf/fusion/fusion.hpp"
#include "hpf/harness/config.hpp"
#include "hpf/replay/replay.hpp"

namespace hpf::harness {

struct ReturnStats {
  std::vector<float> returns;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

/// Linear-interpolation quantile of unsorted data (q in [0, 1]).
double quantile(std::vector<float> values, double q);
ReturnStats summarize(std::vector<float> returns);

struct MetricsRow {
  long step = 0;
  long episodes = 0;
  double train_return = 0.0;
  ReturnStats test;
  float epsilon = 0.0f;
  std::optional<std::array<long, 2>> selection_micro;  // per-million alpha/beta shares
  double loss_total = 0.0;
  double loss_td_tot = 0.0;
  double loss_td_jt = 0.0;
  double loss_instructive = 0.0;
};

std::string metrics_header();
std::string format_row(const MetricsRow& row);

/// 3x3 joint-value tables of the matrix game, row-major over (u_agent0, u_agent1).
struct PayoffTables {
  std::array<float, 9> q_tot{};
  std::array<float, 9> q_jt{};
  static int greedy(const std::array<float, 9>& t);
};
std::string format_tables(const PayoffTables& t);

/// Owns the environment, the learner(s), the replay buffer and all RNG
/// streams of one run.
class Trainer {
 public:
  explicit Trainer(RunConfig cfg);

  const RunConfig& config() const { return cfg_; }
  bool is_hpf() const { return cfg_.is_hpf(); }
  envs::Environment& env() { return *env_; }
  fusion::Learner& learner(int k) { return *learners_.at(static_cast<std::size_t>(k)); }
  int learner_count() const { return static_cast<int>(learners_.size()); }
  const replay::ReplayBuffer& buffer() const { return buffer_; }
  /// Number of policy-sampler draws so far (zero for single-policy runs).
  std::uint64_t sampler_calls() const { return sampler_calls_; }

  using RowCallback = std::function<void(const MetricsRow&)>;
  /// The full training loop; one row per evaluation point.
  std::vector<MetricsRow> train(const RowCallback& on_row = {});

  /// Test-policy returns over `episodes` fresh episodes. Never touches replay.
  ReturnStats evaluate(int episodes);
  /// Requires the matrix environment.
  PayoffTables payoff_tables();

  std::vector<ad::Parameter*> parameters();
  void save(const std::filesystem::path& dir);
  void load(const std::filesystem::path& dir);

 private:
  struct EpisodeOutcome {
    float total_reward = 0.0f;
    int length = 0;
  };
  EpisodeOutcome run_episode(bool training, long t_env);
  std::vector<float> flat_observations() const;
  std::vector<std::uint8_t> flat_available() const;

  RunConfig cfg_;
  std::unique_ptr<envs::Environment> env_;
  replay::EpisodeShape shape_;
  std::vector<std::unique_ptr<fusion::Learner>> learners_;  // [alpha, beta] for HPF
  fusion::Estimator estimator_;
  fusion::Sampler sampler_;
  fusion::TrainOptions train_opts_;
  agents::EpsilonSchedule schedule_;
  replay::ReplayBuffer buffer_;
  fusion::SelectionRecord selection_;
  Rng act_rng_, replay_rng_, eval_rng_;
  std::uint64_t env_seed_, eval_env_seed_;
  std::uint64_t train_episodes_ = 0, eval_episodes_run_ = 0, sampler_calls_ = 0;
};

/// Trains, writes metrics.csv, config.txt, checkpoint/ and (matrix only)
/// payoff.txt into `out`, and returns the rows.
std::vector<MetricsRow> run_training(const RunConfig& cfg, const std::filesystem::path& out, bool verbose = false);

}  // namespace hpf::harness
