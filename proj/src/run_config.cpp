#include "qpass/run_config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "qpass/errors.hpp"

namespace qpass {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json policy_json(const BenchmarkPolicy& p) {
  json tiers = json::array();
  for (const auto& t : p.tiers) tiers.push_back({{"below_seconds", t.below_seconds}, {"repetitions", t.repetitions}});
  return {{"tiers", tiers}, {"fallback_repetitions", p.fallback_reps}};
}

BenchmarkPolicy policy_from(const json& j) {
  reject_unknown(j, {"tiers", "fallback_repetitions"}, "policy");
  BenchmarkPolicy p;
  take(j, "fallback_repetitions", p.fallback_reps);
  if (j.contains("tiers")) {
    p.tiers.clear();
    for (const auto& t : j.at("tiers")) {
      reject_unknown(t, {"below_seconds", "repetitions"}, "policy tier");
      p.tiers.push_back({t.at("below_seconds").get<double>(), t.at("repetitions").get<int>()});
    }
  }
  return p;
}

json train_json(const TrainConfig& t) {
  return {{"gamma", t.gamma},
          {"tau", t.tau},
          {"delta", t.delta},
          {"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"learning_rate_end", t.learning_rate_end},
          {"lr_anneal_steps", t.lr_anneal_steps},
          {"clip_norm", t.clip_norm},
          {"eps_start", t.eps_start},
          {"eps_end", t.eps_end},
          {"eps_anneal_steps", t.eps_anneal_steps},
          {"mu_max", t.mu_max},
          {"blocks", t.blocks},
          {"width", t.width},
          {"stop_floor", t.stop_floor},
          {"seed", t.seed}};
}

TrainConfig train_from(const json& j) {
  reject_unknown(j,
                 {"gamma", "tau", "delta", "batch_size", "learning_rate", "learning_rate_end", "lr_anneal_steps",
                  "clip_norm", "eps_start", "eps_end", "eps_anneal_steps", "mu_max", "blocks", "width", "stop_floor",
                  "seed"},
                 "train");
  TrainConfig t;
  take(j, "gamma", t.gamma);
  take(j, "tau", t.tau);
  take(j, "delta", t.delta);
  take(j, "batch_size", t.batch_size);
  take(j, "learning_rate", t.learning_rate);
  take(j, "learning_rate_end", t.learning_rate_end);
  take(j, "lr_anneal_steps", t.lr_anneal_steps);
  take(j, "clip_norm", t.clip_norm);
  take(j, "eps_start", t.eps_start);
  take(j, "eps_end", t.eps_end);
  take(j, "eps_anneal_steps", t.eps_anneal_steps);
  take(j, "mu_max", t.mu_max);
  take(j, "blocks", t.blocks);
  take(j, "width", t.width);
  take(j, "stop_floor", t.stop_floor);
  take(j, "seed", t.seed);
  return t;
}

json synthetic_json(const SyntheticConfig& s) {
  return {{"seed", s.seed},
          {"token_count", s.token_count},
          {"token_range", s.token_range},
          {"n_actions", s.n_actions},
          {"noise_sigma", s.noise_sigma},
          {"delay_ms", s.delay_ms}};
}

SyntheticConfig synthetic_from(const json& j) {
  reject_unknown(j, {"seed", "token_count", "token_range", "n_actions", "noise_sigma", "delay_ms"}, "synthetic");
  SyntheticConfig s;
  take(j, "seed", s.seed);
  take(j, "token_count", s.token_count);
  take(j, "token_range", s.token_range);
  take(j, "n_actions", s.n_actions);
  take(j, "noise_sigma", s.noise_sigma);
  take(j, "delay_ms", s.delay_ms);
  return s;
}

json llvm_json(const LlvmConfig& l) {
  return {{"frontend", l.frontend},
          {"frontend_cxx", l.frontend_cxx},
          {"optimizer", l.optimizer},
          {"pass_syntax", l.pass_syntax},
          {"frontend_flags", l.frontend_flags},
          {"link_flags", l.link_flags},
          {"optimize_timeout_s", l.optimize_timeout.count()},
          {"run_timeout_s", l.run_timeout.count()},
          {"run_arguments", l.run_arguments},
          {"work_dir", l.work_dir.string()}};
}

LlvmConfig llvm_from(const json& j) {
  reject_unknown(j,
                 {"frontend", "frontend_cxx", "optimizer", "pass_syntax", "frontend_flags", "link_flags",
                  "optimize_timeout_s", "run_timeout_s", "run_arguments", "run_manifest", "work_dir"},
                 "llvm");
  LlvmConfig l;
  take(j, "frontend", l.frontend);
  take(j, "frontend_cxx", l.frontend_cxx);
  take(j, "optimizer", l.optimizer);
  take(j, "pass_syntax", l.pass_syntax);
  take(j, "frontend_flags", l.frontend_flags);
  take(j, "link_flags", l.link_flags);
  if (j.contains("optimize_timeout_s")) l.optimize_timeout = std::chrono::seconds(j.at("optimize_timeout_s").get<int>());
  if (j.contains("run_timeout_s")) l.run_timeout = std::chrono::seconds(j.at("run_timeout_s").get<int>());
  take(j, "run_arguments", l.run_arguments);
  if (j.contains("run_manifest")) {
    std::ifstream in(j.at("run_manifest").get<std::string>());
    if (!in) throw ConfigError("cannot read run manifest " + j.at("run_manifest").get<std::string>());
    std::stringstream ss;
    ss << in.rdbuf();
    for (auto& [k, v] : LlvmConfig::parse_manifest(ss.str())) l.run_arguments[k] = v;
  }
  if (j.contains("work_dir")) l.work_dir = j.at("work_dir").get<std::string>();
  return l;
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  policy.validate();
  if (split_train < 1 || split_valid < 0) throw ConfigError("split ratio must be positive on the training side");
  if (synthetic_programs < 0) throw ConfigError("synthetic_programs must be >= 0");
  if (synthetic_programs == 0 && dataset.empty()) throw ConfigError("either dataset or synthetic_programs is required");
  if (backend != "synthetic" && backend != "llvm") throw ConfigError("backend must be synthetic or llvm");
  if (backend == "llvm" && synthetic_programs > 0) throw ConfigError("generated programs need the synthetic backend");
  if (execution != "inline" && execution != "threads" && execution != "server")
    throw ConfigError("execution must be inline, threads or server");
  if (execution == "threads" && local_workers < 1) throw ConfigError("threads execution needs local_workers >= 1");
  if (local_workers < 0) throw ConfigError("local_workers must be >= 0");
  if (total_steps < 0) throw ConfigError("total_steps must be >= 0");
  if (replay_capacity == 0) throw ConfigError("replay_capacity must be positive");
  if (explore_batch < 0 || explore_every < 1) throw ConfigError("explore_batch >= 0 and explore_every >= 1 required");
  if (retry_budget < 0) throw ConfigError("retry_budget must be >= 0");
  if (synthetic.token_count < 2 || synthetic.token_range < 1) throw ConfigError("synthetic program shape is too small");
  if (llvm.pass_syntax != "new" && llvm.pass_syntax != "legacy") throw ConfigError("pass_syntax must be new or legacy");
}

RunConfig parse_run_config(const std::string& json_text) {
  RunConfig c;
  try {
    const json j = json::parse(json_text);
    reject_unknown(j,
                   {"run_id", "dataset", "synthetic_programs", "split", "shuffle_seed", "exclude", "level", "catalog",
                    "backend", "synthetic", "llvm", "policy", "train", "total_steps", "replay_capacity",
                    "replay_min_fill", "explore_batch", "explore_every", "execution", "local_workers", "listen",
                    "retry_budget", "store", "output"},
                   "run config");
    take(j, "run_id", c.run_id);
    if (j.contains("dataset")) c.dataset = j.at("dataset").get<std::string>();
    take(j, "synthetic_programs", c.synthetic_programs);
    if (j.contains("split")) {
      const auto s = j.at("split").get<std::vector<int>>();
      if (s.size() != 2) throw ConfigError("split must be [train, validation]");
      c.split_train = s[0];
      c.split_valid = s[1];
    }
    take(j, "shuffle_seed", c.shuffle_seed);
    take(j, "exclude", c.exclude);
    if (j.contains("level")) c.level = parse_level(j.at("level").get<std::string>());
    take(j, "catalog", c.catalog);
    take(j, "backend", c.backend);
    if (j.contains("synthetic")) c.synthetic = synthetic_from(j.at("synthetic"));
    if (j.contains("llvm")) c.llvm = llvm_from(j.at("llvm"));
    if (j.contains("policy")) c.policy = policy_from(j.at("policy"));
    if (j.contains("train")) c.train = train_from(j.at("train"));
    take(j, "total_steps", c.total_steps);
    take(j, "replay_capacity", c.replay_capacity);
    take(j, "replay_min_fill", c.replay_min_fill);
    take(j, "explore_batch", c.explore_batch);
    take(j, "explore_every", c.explore_every);
    take(j, "execution", c.execution);
    take(j, "local_workers", c.local_workers);
    take(j, "listen", c.listen);
    take(j, "retry_budget", c.retry_budget);
    if (j.contains("store")) c.store = j.at("store").get<std::string>();
    if (j.contains("output")) c.output = j.at("output").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_json(const RunConfig& c) {
  json j{{"run_id", c.run_id},
         {"dataset", c.dataset.string()},
         {"synthetic_programs", c.synthetic_programs},
         {"split", {c.split_train, c.split_valid}},
         {"shuffle_seed", c.shuffle_seed},
         {"exclude", c.exclude},
         {"level", std::string(to_string(c.level))},
         {"catalog", c.catalog},
         {"backend", c.backend},
         {"synthetic", synthetic_json(c.synthetic)},
         {"llvm", llvm_json(c.llvm)},
         {"policy", policy_json(c.policy)},
         {"train", train_json(c.train)},
         {"total_steps", c.total_steps},
         {"replay_capacity", c.replay_capacity},
         {"replay_min_fill", c.replay_min_fill},
         {"explore_batch", c.explore_batch},
         {"explore_every", c.explore_every},
         {"execution", c.execution},
         {"local_workers", c.local_workers},
         {"listen", c.listen},
         {"retry_budget", c.retry_budget},
         {"store", c.store.string()},
         {"output", c.output.string()}};
  return j.dump(2);
}

}  // namespace qpass
