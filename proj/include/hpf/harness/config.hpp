#pragma once

#include <cstdint>
#include <string>

#include "hpf/kv_file.hpp"

namespace hpf::harness {

/// Every run option. The text form uses the field names as keys. Fields
/// marked "auto" resolve per environment and algorithm in resolve().
struct RunConfig {
  std::string algo = "hpf-wq";  // vdn, qmix, wqmix, qplex, hpf-wq, hpf-qv
  std::string estimator = "additive";
  std::string sampler = "boltzmann";
  std::string env = "matrix";  // matrix, pp, pp-small
  std::uint64_t seed = 1;
  long max_steps = 0;          // 0: auto (matrix 20000, otherwise 500000)
  int episode_limit = 0;       // 0: environment default

  float gamma = 0.99f;
  float lr = 5e-4f;
  std::string optimizer = "auto";  // adam for hpf-*, rmsprop otherwise
  float rmsprop_alpha = 0.99f;
  float grad_clip = 10.0f;

  float eta = 1.0f;
  float wqmix_alpha = 0.1f;
  bool wqmix_weighted = true;
  bool instructive = true;
  bool instructive_both_sides = false;
  std::string test_policy = "beta";  // beta or sampler

  int batch = 32;
  int buffer = 5000;
  int target_update_episodes = 200;
  long eval_interval_steps = 10000;
  int eval_episodes = 16;
  float eval_epsilon = -1.0f;  // <0: auto (matrix 0, otherwise 0.05)

  std::string eps_mode = "auto";  // linear, constant; auto: constant on matrix
  float eps_start = 1.0f;
  float eps_end = 0.05f;
  long eps_anneal_steps = 50000;

  bool is_hpf() const { return algo == "hpf-wq" || algo == "hpf-qv"; }
};

/// Applies key/value overrides on top of `base`. Unknown keys and bad
/// values throw std::invalid_argument.
RunConfig apply_overrides(RunConfig base, const KeyValues& kv);
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Fills every "auto" field.
RunConfig resolve(RunConfig cfg);
/// Throws std::invalid_argument describing the first invalid field.
void validate(const RunConfig& cfg);

std::string to_text(const RunConfig& cfg);

}  // namespace hpf::harness
