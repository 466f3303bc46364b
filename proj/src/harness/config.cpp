#include "hpf/harness/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace hpf::harness {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) throw std::invalid_argument("config: bad value '" + text + "' for " + key);
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument("config: bad boolean '" + text + "' for " + key);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter number(T RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number<T>(k, v); };
}

Setter text(std::string RunConfig::*field) {
  return [field](RunConfig& c, const std::string&, const std::string& v) { c.*field = v; };
}

Setter flag(bool RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_bool(k, v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"algo", text(&RunConfig::algo)},
      {"estimator", text(&RunConfig::estimator)},
      {"sampler", text(&RunConfig::sampler)},
      {"env", text(&RunConfig::env)},
      {"seed", number(&RunConfig::seed)},
      {"max_steps", number(&RunConfig::max_steps)},
      {"episode_limit", number(&RunConfig::episode_limit)},
      {"gamma", number(&RunConfig::gamma)},
      {"lr", number(&RunConfig::lr)},
      {"optimizer", text(&RunConfig::optimizer)},
      {"rmsprop_alpha", number(&RunConfig::rmsprop_alpha)},
      {"grad_clip", number(&RunConfig::grad_clip)},
      {"eta", number(&RunConfig::eta)},
      {"wqmix_alpha", number(&RunConfig::wqmix_alpha)},
      {"wqmix_weighted", flag(&RunConfig::wqmix_weighted)},
      {"instructive", flag(&RunConfig::instructive)},
      {"instructive_both_sides", flag(&RunConfig::instructive_both_sides)},
      {"test_policy", text(&RunConfig::test_policy)},
      {"batch", number(&RunConfig::batch)},
      {"buffer", number(&RunConfig::buffer)},
      {"target_update_episodes", number(&RunConfig::target_update_episodes)},
      {"eval_interval_steps", number(&RunConfig::eval_interval_steps)},
      {"eval_episodes", number(&RunConfig::eval_episodes)},
      {"eval_epsilon", number(&RunConfig::eval_epsilon)},
      {"eps_mode", text(&RunConfig::eps_mode)},
      {"eps_start", number(&RunConfig::eps_start)},
      {"eps_end", number(&RunConfig::eps_end)},
      {"eps_anneal_steps", number(&RunConfig::eps_anneal_steps)},
  };
  return table;
}

bool one_of(const std::string& v, std::initializer_list<const char*> options) {
  for (const char* o : options)
    if (v == o) return true;
  return false;
}

}  // namespace

RunConfig apply_overrides(RunConfig base, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw std::invalid_argument("config: unknown key '" + key + "'");
    it->second(base, key, value);
  }
  return base;
}

RunConfig parse_config(const std::string& text) { return apply_overrides(RunConfig{}, parse_key_values(text)); }

RunConfig load_config(const std::filesystem::path& path) { return apply_overrides(RunConfig{}, read_key_values(path)); }

RunConfig resolve(RunConfig cfg) {
  const bool matrix = cfg.env == "matrix";
  if (cfg.max_steps == 0) cfg.max_steps = matrix ? 20000 : 500000;
  if (cfg.optimizer == "auto") cfg.optimizer = cfg.is_hpf() ? "adam" : "rmsprop";
  if (cfg.eval_epsilon < 0.0f) cfg.eval_epsilon = matrix ? 0.0f : 0.05f;
  if (cfg.eps_mode == "auto") cfg.eps_mode = matrix ? "constant" : "linear";
  return cfg;
}

void validate(const RunConfig& c) {
  const auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
  if (!one_of(c.algo, {"vdn", "qmix", "wqmix", "qplex", "hpf-wq", "hpf-qv"})) fail("unknown algo '" + c.algo + "'");
  if (!one_of(c.estimator, {"additive", "optimistic"})) fail("unknown estimator '" + c.estimator + "'");
  if (!one_of(c.sampler, {"boltzmann", "random"})) fail("unknown sampler '" + c.sampler + "'");
  if (!one_of(c.env, {"matrix", "pp", "pp-small"})) fail("unknown env '" + c.env + "'");
  if (!one_of(c.optimizer, {"auto", "adam", "rmsprop"})) fail("unknown optimizer '" + c.optimizer + "'");
  if (!one_of(c.test_policy, {"beta", "sampler"})) fail("unknown test_policy '" + c.test_policy + "'");
  if (!one_of(c.eps_mode, {"auto", "linear", "constant"})) fail("unknown eps_mode '" + c.eps_mode + "'");
  if (c.max_steps < 0) fail("max_steps must be non-negative");
  if (c.episode_limit < 0) fail("episode_limit must be non-negative");
  if (!(c.gamma >= 0.0f && c.gamma <= 1.0f)) fail("gamma outside [0, 1]");
  if (!(c.lr > 0.0f)) fail("lr must be positive");
  if (!(c.rmsprop_alpha > 0.0f && c.rmsprop_alpha < 1.0f)) fail("rmsprop_alpha outside (0, 1)");
  if (!(c.eta > 0.0f)) fail("eta must be positive");
  if (!(c.wqmix_alpha > 0.0f && c.wqmix_alpha <= 1.0f)) fail("wqmix_alpha outside (0, 1]");
  if (c.batch <= 0 || c.buffer < c.batch) fail("need 0 < batch <= buffer");
  if (c.target_update_episodes <= 0) fail("target_update_episodes must be positive");
  if (c.eval_interval_steps <= 0 || c.eval_episodes <= 0) fail("evaluation interval and episodes must be positive");
  if (c.eval_epsilon > 1.0f) fail("eval_epsilon above 1");
  if (!(c.eps_start >= 0.0f && c.eps_start <= 1.0f && c.eps_end >= 0.0f && c.eps_end <= 1.0f)) fail("epsilon outside [0, 1]");
  if (c.eps_anneal_steps < 0) fail("eps_anneal_steps must be non-negative");
}

std::string to_text(const RunConfig& c) {
  std::string out;
  auto line = [&](const char* k, const auto& v) { out += fmt::format("{} = {}\n", k, v); };
  line("algo", c.algo);
  line("estimator", c.estimator);
  line("sampler", c.sampler);
  line("env", c.env);
  line("seed", c.seed);
  line("max_steps", c.max_steps);
  line("episode_limit", c.episode_limit);
  line("gamma", c.gamma);
  line("lr", c.lr);
  line("optimizer", c.optimizer);
  line("rmsprop_alpha", c.rmsprop_alpha);
  line("grad_clip", c.grad_clip);
  line("eta", c.eta);
  line("wqmix_alpha", c.wqmix_alpha);
  line("wqmix_weighted", c.wqmix_weighted);
  line("instructive", c.instructive);
  line("instructive_both_sides", c.instructive_both_sides);
  line("test_policy", c.test_policy);
  line("batch", c.batch);
  line("buffer", c.buffer);
  line("target_update_episodes", c.target_update_episodes);
  line("eval_interval_steps", c.eval_interval_steps);
  line("eval_episodes", c.eval_episodes);
  line("eval_epsilon", c.eval_epsilon);
  line("eps_mode", c.eps_mode);
  line("eps_start", c.eps_start);
  line("eps_end", c.eps_end);
  line("eps_anneal_steps", c.eps_anneal_steps);
  return out;
}

}  // namespace hpf::harness
