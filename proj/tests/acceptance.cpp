// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails. The predator-prey criterion (9)
// takes most of an hour on one core, so ctest runs it as its own test.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "gradcheck.hpp"
#include "hpf/autodiff/layers.hpp"
#include "hpf/fusion/fusion.hpp"
#include "hpf/fusion/igm_oracle.hpp"
#include "hpf/harness/trainer.hpp"
#include "hpf/mixers/mixers.hpp"

using namespace hpf;
using harness::RunConfig;

namespace {

// Tolerances and thresholds, fixed here and nowhere else.
constexpr int kMatrixSeeds = 5;
constexpr int kMatrixSeedsNeeded = 4;
constexpr double kWqTolerance = 0.5;
constexpr double kQvTolerance = 1.0;
constexpr double kMatrixSecondsPerSeed = 300.0;
constexpr int kOracleInstances = 1000;
constexpr double kOracleSeconds = 10.0;
constexpr int kMonotonicityProbes = 1000;
constexpr float kPerturbation = 1e-2f;
constexpr int kGradGraphs = 50;
constexpr double kGradTolerance = 1e-3;
constexpr int kSamplerDraws = 100000;
constexpr double kSamplerTolerance = 0.01;
constexpr double kShiftTolerance = 1e-6;
constexpr int kPpSeeds = 3;
constexpr double kPpSeconds = 2.0 * 3600.0;
constexpr double kRandomShareTolerance = 0.02;
constexpr int kJointU1U1 = 0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// "0.640123" -> 640123, exactly; the CSV writes shares with six decimals.
long micro_units(const std::string& text) {
  const auto dot = text.find('.');
  const std::string whole = text.substr(0, dot);
  std::string frac = dot == std::string::npos ? "" : text.substr(dot + 1);
  if (frac.size() > 6) throw std::runtime_error("share with more than six decimals: " + text);
  frac.resize(6, '0');
  return std::stol(whole) * 1000000 + std::stol(frac);
}

// Selection columns of each data row of a metrics CSV, in micro units.
std::vector<std::array<long, 2>> selection_columns(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  const auto header = split_csv(line);
  const auto a = std::find(header.begin(), header.end(), "sel_alpha") - header.begin();
  const auto b = std::find(header.begin(), header.end(), "sel_beta") - header.begin();
  std::vector<std::array<long, 2>> out;
  while (std::getline(in, line)) {
    const auto cells = split_csv(line);
    out.push_back({micro_units(cells.at(static_cast<std::size_t>(a))), micro_units(cells.at(static_cast<std::size_t>(b)))});
  }
  return out;
}

RunConfig base_config(const std::string& algo, const std::string& env, std::uint64_t seed) {
  RunConfig cfg;
  cfg.algo = algo;
  cfg.env = env;
  cfg.seed = seed;
  return cfg;
}

struct MatrixRun {
  harness::PayoffTables tables;
  std::string csv;
  double seconds = 0.0;
};

MatrixRun matrix_run(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  harness::Trainer t(cfg);
  MatrixRun r;
  r.csv = harness::metrics_header();
  for (const auto& row : t.train()) r.csv += harness::format_row(row);
  r.tables = t.payoff_tables();
  r.seconds = seconds_since(t0);
  return r;
}

std::string cell_name(int joint) { return fmt::format("(u{},u{})", joint / 3 + 1, joint % 3 + 1); }

// Runs kMatrixSeeds seeds of one algorithm; cached so criteria can share runs.
class MatrixRuns {
 public:
  const std::vector<MatrixRun>& get(const std::string& algo, const std::string& sampler = "boltzmann") {
    const std::string key = algo + "/" + sampler;
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    std::vector<MatrixRun> runs;
    for (int s = 1; s <= kMatrixSeeds; ++s) {
      RunConfig cfg = base_config(algo, "matrix", static_cast<std::uint64_t>(s));
      cfg.sampler = sampler;
      runs.push_back(matrix_run(cfg));
      fmt::print(stderr, "  matrix {} seed {} done in {:.1f} s\n", key, s, runs.back().seconds);
    }
    return cache_.emplace(key, std::move(runs)).first->second;
  }

 private:
  std::map<std::string, std::vector<MatrixRun>> cache_;
};

Outcome hpf_matrix(MatrixRuns& runs, const std::string& algo, double tolerance) {
  const auto& rs = runs.get(algo);
  int hits = 0;
  double slowest = 0.0;
  std::vector<double> at_optimum;
  std::string greedy;
  for (const MatrixRun& r : rs) {
    const int g = harness::PayoffTables::greedy(r.tables.q_jt);
    hits += g == kJointU1U1;
    at_optimum.push_back(r.tables.q_jt[kJointU1U1]);
    slowest = std::max(slowest, r.seconds);
    greedy += cell_name(g) + " ";
  }
  const double med = median(at_optimum);
  Outcome o;
  o.pass = hits >= kMatrixSeedsNeeded && std::fabs(med - 8.0) <= tolerance && slowest <= kMatrixSecondsPerSeed;
  o.detail = fmt::format("{}: Q_jt greedy (u1,u1) in {}/{} seeds [{}], median Q_jt(u1,u1) = {:.3f} (|x-8| <= {}), "
                         "slowest seed {:.0f} s (<= {:.0f})",
                         algo, hits, kMatrixSeeds, greedy.substr(0, greedy.size() - 1), med, tolerance, slowest,
                         kMatrixSecondsPerSeed);
  return o;
}

Outcome criterion_1(MatrixRuns& runs) { return hpf_matrix(runs, "hpf-wq", kWqTolerance); }
Outcome criterion_2(MatrixRuns& runs) { return hpf_matrix(runs, "hpf-qv", kQvTolerance); }

Outcome criterion_3(MatrixRuns& runs) {
  Outcome o{true, ""};
  for (const std::string algo : {"qmix", "vdn"}) {
    int misses = 0;
    std::string greedy;
    for (const MatrixRun& r : runs.get(algo)) {
      const int g = harness::PayoffTables::greedy(r.tables.q_tot);
      misses += g != kJointU1U1;
      greedy += cell_name(g) + " ";
    }
    o.pass = o.pass && misses >= kMatrixSeedsNeeded;
    o.detail += fmt::format("{}{}: Q_tot greedy != (u1,u1) in {}/{} seeds [{}]", o.detail.empty() ? "" : "; ", algo,
                            misses, kMatrixSeeds, greedy.substr(0, greedy.size() - 1));
  }
  return o;
}

Outcome criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed(4, 0));
  int ok = 0;
  for (int i = 0; i < kOracleInstances; ++i) {
    const fusion::IgmOracleInstance inst = fusion::random_igm_instance(rng, 3, 4);
    fusion::validate(inst);
    ok += fusion::igm_oracle_check(inst);
  }
  const double secs = seconds_since(t0);
  return {ok == kOracleInstances && secs < kOracleSeconds,
          fmt::format("oracle true on {}/{} instances in {:.3f} s (< {:.0f} s)", ok, kOracleInstances, secs,
                      kOracleSeconds)};
}

Outcome criterion_5() {
  constexpr int kAgents = 3, kState = 8, kProbesPerMixer = 100;
  Rng rng(derive_seed(5, 0));
  int violations = 0, comparisons = 0;
  auto draw = [&](float lo, float hi) { return lo + (hi - lo) * static_cast<float>(uniform01(rng)); };
  for (int m = 0; m < kMonotonicityProbes / kProbesPerMixer; ++m) {
    mixers::QmixMixer mixer("mix", kAgents, kState, rng);
    for (int p = 0; p < kProbesPerMixer; ++p) {
      std::vector<float> state(kState), q(kAgents);
      for (float& s : state) s = draw(-3.0f, 3.0f);
      for (float& v : q) v = draw(-20.0f, 20.0f);
      auto eval = [&](const std::vector<float>& u) {
        ad::Graph g(false);
        const ad::Var out = mixer.forward(g, g.constant(ad::Tensor({1, kAgents}, u)),
                                          g.constant(ad::Tensor({1, kState}, state)));
        return out.value()[0];
      };
      const float base = eval(q);
      for (int i = 0; i < kAgents; ++i) {
        std::vector<float> up = q;
        up[static_cast<std::size_t>(i)] += kPerturbation;
        violations += eval(up) < base;
        ++comparisons;
      }
    }
  }
  return {violations == 0, fmt::format("{} violations over {} probes ({} single-agent perturbations of +{})", violations,
                                       kMonotonicityProbes, comparisons, kPerturbation)};
}

Outcome criterion_6() {
  using testing::max_gradient_error;
  double worst = 0.0;
  int graphs = 0;
  for (std::uint64_t seed = 1; graphs < kGradGraphs - 1; ++seed) {
    testing::RandomGraph rg(seed);
    {
      ad::Graph probe(false);
      (void)rg.build(probe);
      if (!rg.smooth()) continue;
    }
    worst = std::max(worst, max_gradient_error([&](ad::Graph& g) { return rg.build(g); }, rg.params()));
    ++graphs;
  }
  // Five-step GRU unroll; gradients reach the inputs and the initial state too.
  std::mt19937_64 rng(606);
  ad::GruCell cell("gru", 4, 5, rng);
  ad::Linear head("head", 5, 3, rng);
  std::vector<ad::Parameter> xs;
  for (int t = 0; t < 5; ++t) xs.emplace_back("x" + std::to_string(t), testing::random_tensor({2, 4}, rng));
  ad::Parameter h0("h0", testing::random_tensor({2, 5}, rng, -1.0f, 1.0f));
  std::vector<ad::Parameter*> params{&h0};
  for (auto& x : xs) params.push_back(&x);
  cell.collect(params);
  head.collect(params);
  const double gru = max_gradient_error(
      [&](ad::Graph& g) {
        ad::Var h = g.param(h0);
        ad::Var acc = g.constant(ad::Tensor::scalar(0.0f));
        for (auto& x : xs) {
          h = cell.forward(g, g.param(x), h);
          acc = ad::add(acc, ad::mean(ad::tanh(head.forward(g, h))));
        }
        return acc;
      },
      params);
  worst = std::max(worst, gru);
  ++graphs;
  return {worst < kGradTolerance, fmt::format("max relative error {:.3g} over {} graphs incl. a 5-step GRU unroll "
                                              "(GRU alone {:.3g}; < {})",
                                              worst, graphs, gru, kGradTolerance)};
}

Outcome criterion_7() {
  const float eta = 1.0f;
  const float gap = eta * std::log(3.0f);
  const auto p = fusion::selection_probabilities(gap, 0.0f, eta, fusion::Sampler::boltzmann);
  Rng rng(derive_seed(7, 0));
  long alpha = 0;
  for (int i = 0; i < kSamplerDraws; ++i) alpha += fusion::sample_policy(gap, 0.0f, eta, fusion::Sampler::boltzmann, rng)[0];
  const double freq = static_cast<double>(alpha) / kSamplerDraws;

  // Values and shifts on a 1/64 grid are exact in float, so any change in
  // the probabilities comes from the sampler itself.
  double worst_shift = 0.0;
  Rng grid(derive_seed(7, 1));
  auto on_grid = [&](int span) { return static_cast<float>(uniform_int(grid, 2 * span * 64 + 1) - span * 64) / 64.0f; };
  for (int i = 0; i < 1000; ++i) {
    const float a = on_grid(20), b = on_grid(20), c = on_grid(10000);
    for (float e : {0.5f, 1.0f, 2.0f}) {
      const auto p0 = fusion::selection_probabilities(a, b, e, fusion::Sampler::boltzmann);
      const auto p1 = fusion::selection_probabilities(a + c, b + c, e, fusion::Sampler::boltzmann);
      worst_shift = std::max({worst_shift, std::fabs(p0[0] - p1[0]), std::fabs(p0[1] - p1[1])});
    }
  }
  const bool pass = std::fabs(p[0] - 0.75) < 1e-6 && std::fabs(freq - 0.75) <= kSamplerTolerance &&
                    worst_shift <= kShiftTolerance;
  return {pass, fmt::format("P(alpha) = {:.7f} analytic, {:.4f} over {} draws (+-{}); max shift change {:.2g} (<= {})",
                            p[0], freq, kSamplerDraws, kSamplerTolerance, worst_shift, kShiftTolerance)};
}

Outcome criterion_8() {
  int cases = 0, wrong = 0;
  const std::vector<std::array<float, 2>> values{{2, 5}, {5, 2}, {3, 3}, {-7.5f, -1}, {-1, -7.5f}, {0, 0}};
  for (bool is_argmax : {true, false}) {
    for (const auto& [q_tot, q_jt] : values) {
      for (float alpha : {0.1f, 0.5f, 1.0f}) {
        const float want = is_argmax || q_tot < q_jt ? 1.0f : alpha;
        wrong += mixers::wqmix_weight(is_argmax, q_tot, q_jt, alpha) != want;
        ++cases;
      }
    }
  }
  const bool examples = mixers::wqmix_weight(true, 5, 2, 0.1f) == 1.0f && mixers::wqmix_weight(false, 2, 5, 0.1f) == 1.0f &&
                        mixers::wqmix_weight(false, 5, 2, 0.1f) == 0.1f;
  return {wrong == 0 && examples, fmt::format("{} of {} truth-table cases match exactly", cases - wrong, cases)};
}

Outcome criterion_9(const std::filesystem::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  std::map<std::string, std::vector<double>> finals;
  for (const std::string algo : {"hpf-wq", "qmix"}) {
    for (int s = 1; s <= kPpSeeds; ++s) {
      const auto ts = std::chrono::steady_clock::now();
      const auto rows =
          harness::run_training(base_config(algo, "pp-small", static_cast<std::uint64_t>(s)), work / fmt::format("pp-small-{}-seed{}", algo, s));
      finals[algo].push_back(rows.back().test.median);
      fmt::print(stderr, "  pp-small {} seed {}: final test median {:.2f} ({:.0f} s)\n", algo, s, rows.back().test.median,
                 seconds_since(ts));
    }
  }
  const double secs = seconds_since(t0);
  const double wq = median(finals["hpf-wq"]);
  const double qm = median(finals["qmix"]);
  return {wq >= qm && wq > 0.0 && secs <= kPpSeconds,
          fmt::format("median final test return hpf-wq {:.2f} vs qmix {:.2f} (need >= and > 0); {:.0f} s total (<= {:.0f})",
                      wq, qm, secs, kPpSeconds)};
}

Outcome criterion_10(MatrixRuns& runs) {
  // Random sampler: every logged row near an even split.
  RunConfig cfg = base_config("hpf-wq", "matrix", 1);
  cfg.sampler = "random";
  const MatrixRun r = matrix_run(cfg);
  double worst = 0.0;
  const auto random_rows = selection_columns(r.csv);
  for (const auto& s : random_rows)
    for (long v : s) worst = std::max(worst, std::fabs(static_cast<double>(v) / 1e6 - 0.5));
  // Boltzmann sampler: logged shares sum to exactly one.
  int rows = 0, exact = 0;
  for (const std::string algo : {"hpf-wq", "hpf-qv"}) {
    for (const MatrixRun& m : runs.get(algo)) {
      for (const auto& s : selection_columns(m.csv)) {
        ++rows;
        exact += s[0] + s[1] == 1000000;
      }
    }
  }
  return {!random_rows.empty() && worst <= kRandomShareTolerance && rows > 0 && exact == rows,
          fmt::format("random sampler: {} rows, max |share - 0.5| = {:.4f} (<= {}); boltzmann: {}/{} rows sum to 1 exactly",
                      random_rows.size(), worst, kRandomShareTolerance, exact, rows)};
}

Outcome criterion_11(const std::filesystem::path& work) {
  struct Case {
    std::string algo, env;
    long steps;
  };
  const std::vector<Case> cases{{"hpf-wq", "matrix", 3000}, {"hpf-qv", "matrix", 3000}, {"vdn", "matrix", 3000},
                                {"qplex", "matrix", 3000},  {"hpf-wq", "pp-small", 9000}, {"qmix", "pp-small", 9000}};
  int same = 0;
  std::string names;
  for (const Case& c : cases) {
    RunConfig cfg = base_config(c.algo, c.env, 42);
    cfg.max_steps = c.steps;
    cfg.eval_interval_steps = c.steps / 3;
    const auto a = work / fmt::format("det-{}-{}-a", c.algo, c.env);
    const auto b = work / fmt::format("det-{}-{}-b", c.algo, c.env);
    harness::run_training(cfg, a);
    harness::run_training(cfg, b);
    const std::string ca = read_file(a / "metrics.csv");
    const bool eq = !ca.empty() && ca == read_file(b / "metrics.csv");
    same += eq;
    names += fmt::format("{}{}/{}{}", names.empty() ? "" : ", ", c.algo, c.env, eq ? "" : " DIFFERS");
  }
  return {same == static_cast<int>(cases.size()),
          fmt::format("{}/{} configs byte-identical across two same-seed runs ({})", same, cases.size(), names)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks for the HPF framework"};
  std::vector<int> only, skip;
  std::string work = (std::filesystem::temp_directory_path() / "hpf_acceptance").string();
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 11));
  app.add_option("--skip", skip, "Skip these criteria")->check(CLI::Range(1, 11));
  app.add_option("--work", work, "Directory for run artifacts");
  CLI11_PARSE(app, argc, argv);

  std::filesystem::create_directories(work);
  MatrixRuns runs;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"matrix game HPF-WQ", [&] { return criterion_1(runs); }},
      {"matrix game HPF-QV", [&] { return criterion_2(runs); }},
      {"matrix game baselines miss (u1,u1)", [&] { return criterion_3(runs); }},
      {"IGM oracle", criterion_4},
      {"QMIX monotonicity", criterion_5},
      {"autodiff vs finite differences", criterion_6},
      {"policy sampler", criterion_7},
      {"WQMIX weighting", criterion_8},
      {"predator-prey pp-small", [&] { return criterion_9(work); }},
      {"sampler ablation and selection logging", [&] { return criterion_10(runs); }},
      {"determinism", [&] { return criterion_11(work); }},
  };
  const std::set<int> only_set(only.begin(), only.end()), skip_set(skip.begin(), skip.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if ((!only_set.empty() && !only_set.count(id)) || skip_set.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    fmt::print("criterion {:>2} {} {}: {} [{:.1f} s]\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail,
               seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
