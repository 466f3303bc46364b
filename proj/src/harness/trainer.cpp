#include "hpf/harness/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <malloc.h>
#include <stdexcept>

#include <fmt/format.h>

#include "hpf/autodiff/checkpoint.hpp"
#include "hpf/autodiff/optim.hpp"

namespace hpf::harness {

using fusion::Learner;
using fusion::Method;

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

std::string micro_text(long micro) { return fmt::format("{}.{:06d}", micro / 1000000, micro % 1000000); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

}  // namespace

double quantile(std::vector<float> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (static_cast<double>(values[hi]) - values[lo]);
}

ReturnStats summarize(std::vector<float> returns) {
  ReturnStats s;
  s.median = quantile(returns, 0.5);
  s.q25 = quantile(returns, 0.25);
  s.q75 = quantile(returns, 0.75);
  s.returns = std::move(returns);
  return s;
}

std::string metrics_header() {
  return "step,episodes,train_return,test_return_median,test_return_q25,test_return_q75,epsilon,"
         "sel_alpha,sel_beta,loss_total,loss_td_tot,loss_td_jt,loss_instructive\n";
}

std::string format_row(const MetricsRow& r) {
  std::string sel = ",";
  if (r.selection_micro) sel = micro_text((*r.selection_micro)[0]) + "," + micro_text((*r.selection_micro)[1]);
  return fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.step, r.episodes,
                     r.train_return, r.test.median, r.test.q25, r.test.q75, r.epsilon, sel, r.loss_total, r.loss_td_tot,
                     r.loss_td_jt, r.loss_instructive);
}

int PayoffTables::greedy(const std::array<float, 9>& t) {
  return static_cast<int>(std::max_element(t.begin(), t.end()) - t.begin());
}

std::string format_tables(const PayoffTables& t) {
  std::string out;
  auto table = [&](const char* title, const std::array<float, 9>& v) {
    const int g = PayoffTables::greedy(v);
    out += fmt::format("{} (rows: agent 1, columns: agent 2, * = greedy)\n", title);
    out += fmt::format("{:>4}{:>10}{:>10}{:>10}\n", "", "u1", "u2", "u3");
    for (int r = 0; r < 3; ++r) {
      out += fmt::format("{:>4}", fmt::format("u{}", r + 1));
      for (int c = 0; c < 3; ++c)
        out += fmt::format("{:>10}", fmt::format("{:.2f}{}", v[sz(r * 3 + c)], r * 3 + c == g ? "*" : " "));
      out += '\n';
    }
    out += fmt::format("greedy = (u{}, u{})\n", g / 3 + 1, g % 3 + 1);
  };
  table("Q_tot", t.q_tot);
  out += '\n';
  table("Q_jt", t.q_jt);
  return out;
}

Trainer::Trainer(RunConfig cfg)
    : cfg_([&] {
        validate(cfg);
        return resolve(cfg);
      }()),
      env_(envs::make_environment(cfg_.env, cfg_.episode_limit)),
      shape_{env_->spec().n_agents, env_->spec().n_actions, env_->spec().obs_width, env_->spec().state_width},
      estimator_(fusion::parse_estimator(cfg_.estimator)),
      sampler_(fusion::parse_sampler(cfg_.sampler)),
      buffer_(cfg_.buffer),
      act_rng_(derive_seed(cfg_.seed, 1)),
      replay_rng_(derive_seed(cfg_.seed, 3)),
      eval_rng_(derive_seed(cfg_.seed, 4)),
      env_seed_(derive_seed(cfg_.seed, 2)),
      eval_env_seed_(derive_seed(cfg_.seed, 5)) {
  // Graph tensors are large and short-lived. Keep freed blocks in the heap
  // instead of returning them to the kernel after every training step.
  static const bool heap_tuned = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)heap_tuned;
  Rng init(derive_seed(cfg_.seed, 0));
  const Learner::Options opts{cfg_.wqmix_alpha, cfg_.wqmix_weighted};
  if (cfg_.algo == "hpf-wq" || cfg_.algo == "hpf-qv") {
    const bool wq = cfg_.algo == "hpf-wq";
    learners_.push_back(std::make_unique<Learner>("alpha", wq ? Method::wqmix : Method::qplex, shape_, init, opts));
    learners_.push_back(std::make_unique<Learner>("beta", wq ? Method::qmix : Method::vdn, shape_, init, opts));
  } else {
    learners_.push_back(std::make_unique<Learner>(cfg_.algo, fusion::parse_method(cfg_.algo), shape_, init, opts));
  }
  for (auto& l : learners_) {
    if (cfg_.optimizer == "adam")
      l->set_optimizer(std::make_unique<ad::Adam>(cfg_.lr));
    else
      l->set_optimizer(std::make_unique<ad::RmsProp>(cfg_.lr, cfg_.rmsprop_alpha));
  }
  train_opts_.gamma = cfg_.gamma;
  train_opts_.grad_clip = cfg_.grad_clip;
  train_opts_.instructive = cfg_.instructive;
  train_opts_.instructive_both_sides = cfg_.instructive_both_sides;
  schedule_.start = cfg_.eps_start;
  schedule_.end = cfg_.eps_end;
  schedule_.anneal_steps = cfg_.eps_anneal_steps;
  schedule_.mode = cfg_.eps_mode == "constant" ? agents::EpsilonSchedule::Mode::constant
                                               : agents::EpsilonSchedule::Mode::linear_anneal;
}

std::vector<float> Trainer::flat_observations() const {
  std::vector<float> out;
  for (const auto& o : env_->observations()) out.insert(out.end(), o.begin(), o.end());
  return out;
}

std::vector<std::uint8_t> Trainer::flat_available() const {
  std::vector<std::uint8_t> out;
  for (int i = 0; i < shape_.n_agents; ++i)
    for (int a : env_->available_actions(i)) out.push_back(static_cast<std::uint8_t>(a));
  return out;
}

Trainer::EpisodeOutcome Trainer::run_episode(bool training, long t_env) {
  env_->reset(training ? derive_seed(env_seed_, train_episodes_++) : derive_seed(eval_env_seed_, eval_episodes_run_++));
  Rng& rng = training ? act_rng_ : eval_rng_;
  const float eps = training ? schedule_.at(t_env) : cfg_.eval_epsilon;
  // Which learners act: both for HPF training (and the sampler test policy),
  // otherwise a single one.
  const bool fused = is_hpf() && (training || cfg_.test_policy == "sampler");
  const int solo = is_hpf() ? 1 : 0;
  std::vector<int> active;
  if (fused)
    active = {0, 1};
  else
    active = {solo};

  std::vector<ad::Tensor> hidden(learners_.size());
  for (int k : active) hidden[sz(k)] = learners_[sz(k)]->initial_hidden();

  const int n = shape_.n_agents, A = shape_.n_actions;
  std::vector<float> obs = flat_observations();
  std::vector<float> state = env_->state();
  std::vector<std::uint8_t> avail = flat_available();
  replay::EpisodeRecord rec(shape_);
  if (training) rec.begin(obs, state, avail);

  EpisodeOutcome out;
  std::vector<int> last;
  std::vector<float> inputs;
  std::vector<std::vector<float>> q(learners_.size());
  std::vector<std::vector<int>> acts(learners_.size(), std::vector<int>(sz(n)));
  while (true) {
    inputs.clear();
    agents::append_inputs(inputs, obs, shape_.obs_width, n, A, last);
    for (int k : active) {
      q[sz(k)] = learners_[sz(k)]->utilities(inputs, hidden[sz(k)]);
      for (int i = 0; i < n; ++i)
        acts[sz(k)][sz(i)] = agents::select_action(std::span<const float>(q[sz(k)]).subspan(sz(i * A), sz(A)), eps, rng);
    }
    std::vector<int> joint;
    int selected = replay::EpisodeRecord::kNoSelection;
    if (fused) {
      const float va = fusion::estimate_policy_value(*learners_[0], q[0], state, estimator_);
      const float vb = fusion::estimate_policy_value(*learners_[1], q[1], state, estimator_);
      const fusion::Selection w = fusion::sample_policy(va, vb, cfg_.eta, sampler_, rng);
      joint = fusion::composite_act(acts[0], acts[1], w);
      selected = w[0] == 1 ? 0 : 1;
      if (training) {
        selection_.record(w);
        ++sampler_calls_;
      }
    } else {
      joint = acts[sz(solo)];
    }
    const envs::StepResult r = env_->step(joint);
    out.total_reward += r.reward;
    ++out.length;
    obs.clear();
    for (const auto& o : r.next_observations) obs.insert(obs.end(), o.begin(), o.end());
    state = r.next_state;
    if (training) {
      avail = flat_available();
      rec.add(joint, r.reward, r.terminated, selected, obs, state, avail);
    }
    last = joint;
    if (r.terminated || r.truncated_by_limit) {
      rec.truncated = !r.terminated;
      break;
    }
  }
  if (training) buffer_.push_episode(std::move(rec));
  return out;
}

ReturnStats Trainer::evaluate(int episodes) {
  if (episodes <= 0) throw std::invalid_argument("evaluate: episode count must be positive");
  std::vector<float> returns;
  for (int e = 0; e < episodes; ++e) returns.push_back(run_episode(false, 0).total_reward);
  return summarize(std::move(returns));
}

std::vector<MetricsRow> Trainer::train(const RowCallback& on_row) {
  std::vector<MetricsRow> rows;
  long t_env = 0, episodes = 0, last_eval = 0;
  double return_sum = 0.0;
  long return_count = 0;
  fusion::LossBreakdown loss_sum;
  long train_steps = 0;
  selection_.reset();
  while (t_env < cfg_.max_steps) {
    const EpisodeOutcome ep = run_episode(true, t_env);
    t_env += ep.length;
    ++episodes;
    return_sum += ep.total_reward;
    ++return_count;

    if (buffer_.size() > cfg_.batch) {
      const auto batch = buffer_.sample_batch(cfg_.batch, replay_rng_);
      const fusion::LossBreakdown l = is_hpf() ? fusion::train_step(*learners_[0], *learners_[1], *batch, train_opts_)
                                                : fusion::train_step(*learners_[0], *batch, train_opts_);
      loss_sum.total += l.total;
      loss_sum.td_tot += l.td_tot;
      loss_sum.td_jt += l.td_jt;
      loss_sum.instructive += l.instructive;
      ++train_steps;
    }
    if (episodes % cfg_.target_update_episodes == 0)
      for (auto& l : learners_) l->sync_targets();

    if (t_env - last_eval >= cfg_.eval_interval_steps || t_env >= cfg_.max_steps) {
      MetricsRow row;
      row.step = t_env;
      row.episodes = episodes;
      row.train_return = return_sum / static_cast<double>(return_count);
      row.test = evaluate(cfg_.eval_episodes);
      row.epsilon = schedule_.at(t_env);
      if (is_hpf()) {
        const long alpha = selection_.total() == 0
                               ? 500000
                               : std::lround(1e6 * static_cast<double>(selection_.count(0)) / static_cast<double>(selection_.total()));
        row.selection_micro = std::array<long, 2>{alpha, 1000000 - alpha};
      }
      if (train_steps > 0) {
        const double d = static_cast<double>(train_steps);
        row.loss_total = loss_sum.total / d;
        row.loss_td_tot = loss_sum.td_tot / d;
        row.loss_td_jt = loss_sum.td_jt / d;
        row.loss_instructive = loss_sum.instructive / d;
      }
      rows.push_back(row);
      if (on_row) on_row(row);
      last_eval = t_env;
      return_sum = 0.0;
      return_count = 0;
      loss_sum = {};
      train_steps = 0;
      selection_.reset();
    }
  }
  return rows;
}

PayoffTables Trainer::payoff_tables() {
  if (cfg_.env != "matrix") throw std::invalid_argument("payoff tables exist only for the matrix environment");
  env_->reset(0);
  std::vector<float> inputs;
  agents::append_inputs(inputs, flat_observations(), shape_.obs_width, shape_.n_agents, shape_.n_actions, {});
  const std::vector<float> state = env_->state();
  Learner& tot = *learners_.back();
  Learner& jt = *learners_.front();
  ad::Tensor h_tot = tot.initial_hidden(), h_jt = jt.initial_hidden();
  const std::vector<float> q_tot = tot.utilities(inputs, h_tot);
  const std::vector<float> q_jt = jt.utilities(inputs, h_jt);
  PayoffTables t;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      const int joint[2] = {a, b};
      t.q_tot[sz(a * 3 + b)] = tot.restricted_value(q_tot, joint, state);
      t.q_jt[sz(a * 3 + b)] = jt.joint_value(q_jt, joint, state);
    }
  }
  return t;
}

std::vector<ad::Parameter*> Trainer::parameters() {
  std::vector<ad::Parameter*> out;
  for (auto& l : learners_) {
    const auto p = l->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

void Trainer::save(const std::filesystem::path& dir) {
  const auto params = parameters();
  const std::vector<const ad::Parameter*> view(params.begin(), params.end());
  ad::save_checkpoint(dir, view);
  write_text(dir / "config.txt", to_text(cfg_));
}

void Trainer::load(const std::filesystem::path& dir) {
  ad::load_checkpoint(dir, parameters());
  for (auto& l : learners_) l->sync_targets();
}

std::vector<MetricsRow> run_training(const RunConfig& cfg, const std::filesystem::path& out, bool verbose) {
  Trainer trainer(cfg);
  std::filesystem::create_directories(out);
  write_text(out / "config.txt", to_text(trainer.config()));
  std::ofstream csv(out / "metrics.csv");
  if (!csv) throw std::runtime_error("cannot write " + (out / "metrics.csv").string());
  csv << metrics_header();
  const auto rows = trainer.train([&](const MetricsRow& row) {
    csv << format_row(row);
    csv.flush();
    if (verbose)
      fmt::print(stderr, "step {:>8}  episodes {:>7}  train {:>9.3f}  test median {:>9.3f}\n", row.step, row.episodes,
                 row.train_return, row.test.median);
  });
  trainer.save(out / "checkpoint");
  if (trainer.config().env == "matrix") write_text(out / "payoff.txt", format_tables(trainer.payoff_tables()));
  return rows;
}

}  // namespace hpf::harness
