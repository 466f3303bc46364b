#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "hpf/envs/matrix_game.hpp"
#include "hpf/harness/config.hpp"
#include "hpf/harness/trainer.hpp"

using namespace hpf;
using namespace hpf::harness;

namespace {

RunConfig matrix_config(const std::string& algo, long steps) {
  RunConfig cfg;
  cfg.algo = algo;
  cfg.env = "matrix";
  cfg.max_steps = steps;
  cfg.eval_interval_steps = 100;
  return cfg;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ad::Parameter& find_param(fusion::Learner& l, const std::string& suffix) {
  for (ad::Parameter* p : l.parameters())
    if (p->name.size() >= suffix.size() && p->name.compare(p->name.size() - suffix.size(), suffix.size(), suffix) == 0)
      return *p;
  throw std::runtime_error("no parameter ending in " + suffix);
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hpf_test_harness_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config defaults and parsing") {
  const RunConfig d;
  CHECK(d.gamma == doctest::Approx(0.99));
  CHECK(d.lr == doctest::Approx(5e-4));
  CHECK(d.eta == 1.0f);
  CHECK(d.wqmix_alpha == doctest::Approx(0.1));
  CHECK(d.batch == 32);
  CHECK(d.buffer == 5000);
  CHECK(d.target_update_episodes == 200);
  CHECK(d.eval_interval_steps == 10000);
  CHECK(d.eval_episodes == 16);

  const RunConfig c = parse_config("# comment\nalgo = qmix\nenv = pp-small\nseed = 7\neta = 0.5\nwqmix_weighted = false\n");
  CHECK(c.algo == "qmix");
  CHECK(c.env == "pp-small");
  CHECK(c.seed == 7);
  CHECK(c.eta == 0.5f);
  CHECK_FALSE(c.wqmix_weighted);

  SUBCASE("text round trip") {
    const RunConfig back = parse_config(to_text(c));
    CHECK(to_text(back) == to_text(c));
  }
  SUBCASE("unknown keys and bad values are rejected") {
    CHECK_THROWS_AS((void)parse_config("learning_rate = 1\n"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_config("batch = many\n"), std::invalid_argument);
  }
}

TEST_CASE("resolve fills the auto fields per environment") {
  RunConfig m;
  m.env = "matrix";
  const RunConfig rm = resolve(m);
  CHECK(rm.max_steps == 20000);
  CHECK(rm.eps_mode == "constant");
  CHECK(rm.eval_epsilon == 0.0f);
  CHECK(rm.optimizer == "adam");

  RunConfig p;
  p.env = "pp-small";
  p.algo = "qmix";
  const RunConfig rp = resolve(p);
  CHECK(rp.max_steps == 500000);
  CHECK(rp.eps_mode == "linear");
  CHECK(rp.eval_epsilon == doctest::Approx(0.05));
  CHECK(rp.optimizer == "rmsprop");
}

TEST_CASE("invalid configs fail before any rollout") {
  for (const char* text : {"algo = iql\n", "env = smac\n", "sampler = greedy\n", "estimator = max\n", "batch = 0\n",
                           "eta = 0\n", "wqmix_alpha = 1.5\n", "test_policy = alpha\n", "gamma = 1.5\n"}) {
    CAPTURE(text);
    CHECK_THROWS_AS(Trainer(parse_config(text)), std::invalid_argument);
  }
}

TEST_CASE("quantile interpolates linearly") {
  CHECK(quantile({3, 1, 2}, 0.5) == 2.0);
  CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile({1, 2, 3, 4}, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({5}, 0.75) == 5.0);
  CHECK_THROWS_AS((void)quantile({}, 0.5), std::invalid_argument);
  const ReturnStats s = summarize({4, 0, 8, 2, 6});
  CHECK(s.median == 4.0);
  CHECK(s.q25 == 2.0);
  CHECK(s.q75 == 6.0);
}

TEST_CASE("evaluation returns one sample per episode and never touches replay") {
  Trainer t(matrix_config("hpf-wq", 200));
  const ReturnStats s = t.evaluate(16);
  CHECK(s.returns.size() == 16);
  CHECK(t.buffer().size() == 0);
}

TEST_CASE("uniform random test policy averages the payoff table") {
  RunConfig cfg = matrix_config("qmix", 200);
  cfg.eval_epsilon = 1.0f;
  Trainer t(cfg);
  const ReturnStats s = t.evaluate(4000);
  const double mean = std::accumulate(s.returns.begin(), s.returns.end(), 0.0) / 4000.0;
  // payoff sd is about 7.7, so 0.5 is over four standard errors
  CHECK(std::abs(mean + 34.0 / 9.0) < 0.5);
}

TEST_CASE("a greedy (u1, u1) test policy returns 8") {
  Trainer t(matrix_config("qmix", 200));
  ad::Parameter& w = find_param(t.learner(0), "head.weight");
  ad::Parameter& b = find_param(t.learner(0), "head.bias");
  std::fill(w.value.data().begin(), w.value.data().end(), 0.0f);
  b.value[0] = 10.0f;
  b.value[1] = 0.0f;
  b.value[2] = 0.0f;
  const ReturnStats s = t.evaluate(16);
  for (float r : s.returns) CHECK(r == 8.0f);
  CHECK(s.median == 8.0);
}

TEST_CASE("payoff tables mark the maximal cell, lowest index on ties") {
  std::array<float, 9> t{};
  CHECK(PayoffTables::greedy(t) == 0);
  t[4] = 1.0f;
  t[7] = 1.0f;
  CHECK(PayoffTables::greedy(t) == 4);
  t[8] = 2.0f;
  CHECK(PayoffTables::greedy(t) == 8);

  Trainer tr(matrix_config("hpf-wq", 200));
  const PayoffTables p = tr.payoff_tables();
  const std::string text = format_tables(p);
  CHECK(text.find("Q_jt") != std::string::npos);
  CHECK(text.find("Q_tot") != std::string::npos);
}

TEST_CASE("payoff tables need the matrix game") {
  RunConfig cfg;
  cfg.env = "pp-small";
  Trainer t(cfg);
  CHECK_THROWS_AS((void)t.payoff_tables(), std::logic_error);
}

TEST_CASE("a baseline run never samples policies and has no instructive loss") {
  Trainer t(matrix_config("qmix", 300));
  const auto rows = t.train();
  REQUIRE_FALSE(rows.empty());
  CHECK(t.sampler_calls() == 0);
  CHECK(t.learner_count() == 1);
  for (const MetricsRow& r : rows) {
    CHECK_FALSE(r.selection_micro.has_value());
    CHECK(r.loss_instructive == 0.0);
  }
}

TEST_CASE("hpf selection shares sum to one per row") {
  Trainer t(matrix_config("hpf-wq", 300));
  const auto rows = t.train();
  REQUIRE(rows.size() == 3);
  CHECK(t.sampler_calls() > 0);
  for (const MetricsRow& r : rows) {
    REQUIRE(r.selection_micro.has_value());
    CHECK((*r.selection_micro)[0] + (*r.selection_micro)[1] == 1000000);
  }
  CHECK(rows.back().step == 300);
}

TEST_CASE("same seed, same metrics file") {
  RunConfig cfg = matrix_config("hpf-wq", 400);
  cfg.seed = 11;
  const auto a = scratch("det_a"), b = scratch("det_b");
  run_training(cfg, a);
  run_training(cfg, b);
  const std::string ca = read_file(a / "metrics.csv");
  CHECK_FALSE(ca.empty());
  CHECK(ca == read_file(b / "metrics.csv"));
  CHECK(ca.rfind(metrics_header(), 0) == 0);

  cfg.seed = 12;
  const auto c = scratch("det_c");
  run_training(cfg, c);
  CHECK(ca != read_file(c / "metrics.csv"));
  for (const auto& d : {a, b, c}) std::filesystem::remove_all(d);
}

TEST_CASE("checkpoint save and load restore evaluation") {
  const auto dir = scratch("ckpt");
  Trainer t(matrix_config("hpf-wq", 300));
  t.train();
  t.save(dir);
  const PayoffTables before = t.payoff_tables();

  Trainer u(matrix_config("hpf-wq", 300));
  u.load(dir);
  const PayoffTables after = u.payoff_tables();
  CHECK(before.q_jt == after.q_jt);
  CHECK(before.q_tot == after.q_tot);
  std::filesystem::remove_all(dir);
}
