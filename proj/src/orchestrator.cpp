#include "qpass/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qpass/checkpoint.hpp"
#include "qpass/environment.hpp"
#include "qpass/errors.hpp"
#include "qpass/llvm_backend.hpp"
#include "qpass/report.hpp"
#include "qpass/synthetic_backend.hpp"

namespace qpass {

// ---- rollout -------------------------------------------------------------

Trajectory rollout(const ActionSpace& space, int mu_max, const AgentState& start, const QFunction& q,
                   const StepFunction& step, const RolloutPolicy& policy) {
  Trajectory t;
  t.states.push_back(start);
  for (;;) {
    const AgentState& s = t.states.back();
    const auto mask = legal_actions(space, s.history, mu_max);
    std::vector<int> legal;
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) legal.push_back(static_cast<int>(i));
    if (legal.empty()) break;

    int a = -1;
    if (!policy.greedy && policy.rng &&
        std::uniform_real_distribution<double>(0.0, 1.0)(*policy.rng) < policy.epsilon) {
      a = legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(*policy.rng)];
    } else {
      const auto values = q(s);
      a = *legal_argmax(values, mask);
      if (!s.history.pending && values[static_cast<std::size_t>(a)] <= 0.0) break;
    }
    try {
      AgentState next = step(s, a);
      t.actions.push_back(a);
      t.states.push_back(std::move(next));
    } catch (const EnvironmentFault& e) {
      t.faulted = true;
      t.fault = e.what();
      break;
    }
  }
  return t;
}

std::string format_sequence(const std::vector<int>& actions) {
  std::string out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (i) out += "→";
    out += std::to_string(actions[i]);
  }
  return out;
}

// ---- programs and split --------------------------------------------------

std::vector<ProgramSource> load_programs(const RunConfig& config) {
  std::vector<ProgramSource> out;
  if (config.synthetic_programs > 0) {
    for (int i = 0; i < config.synthetic_programs; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "prog_%03d", i);
      out.push_back({id, {}, id});
    }
  } else {
    std::error_code ec;
    if (!std::filesystem::is_directory(config.dataset, ec))
      throw ConfigError("dataset " + config.dataset.string() + " is not a readable directory");
    for (const auto& entry : std::filesystem::directory_iterator(config.dataset)) {
      const auto ext = entry.path().extension().string();
      if (!entry.is_regular_file() || (ext != ".c" && ext != ".cc" && ext != ".cpp" && ext != ".cxx")) continue;
      std::ifstream in(entry.path());
      std::stringstream ss;
      ss << in.rdbuf();
      out.push_back({entry.path().filename().string(), entry.path(), ss.str()});
    }
  }
  std::erase_if(out, [&](const ProgramSource& p) {
    const auto stem = std::filesystem::path(p.id).stem().string();
    return std::find(config.exclude.begin(), config.exclude.end(), p.id) != config.exclude.end() ||
           std::find(config.exclude.begin(), config.exclude.end(), stem) != config.exclude.end();
  });
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  if (out.empty()) throw ConfigError("dataset is empty");
  return out;
}

Split split_programs(std::vector<std::string> ids, int train_ratio, int valid_ratio, std::uint64_t seed) {
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n = ids.size();
  const auto parts = static_cast<std::size_t>(train_ratio + valid_ratio);
  std::size_t n_valid = (n * static_cast<std::size_t>(valid_ratio) + parts - 1) / parts;
  if (n_valid >= n) n_valid = n - 1;  // keep at least one training program
  Split s;
  s.train.assign(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(n_valid));
  s.valid.assign(ids.end() - static_cast<std::ptrdiff_t>(n_valid), ids.end());
  return s;
}

std::optional<double> EvalReport::geomean(const std::string& set, Metric metric) const {
  std::vector<double> v;
  for (const auto& e : programs) {
    if (e.set != set) continue;
    v.push_back(metric == Metric::agent ? e.agent_speedup : metric == Metric::o3 ? e.o3_speedup : e.best_observed);
  }
  return geometric_mean(v);
}

// ---- factories -----------------------------------------------------------

std::unique_ptr<Backend> make_backend(const RunConfig& config) {
  if (config.backend == "synthetic") return std::make_unique<SyntheticBackend>(config.synthetic);
  if (config.backend == "llvm") return std::make_unique<LlvmBackend>(config.llvm);
  throw ConfigError("unknown backend '" + config.backend + "'");
}

Catalogs load_catalogs(const RunConfig& config) {
  if (config.catalog == "shipped") return Catalogs::shipped();
  if (config.catalog == "synthetic") return Catalogs::synthetic(config.synthetic.n_actions);
  return Catalogs::load(config.catalog);
}

std::unique_ptr<OpcodeHistogramEncoder> make_encoder(const RunConfig& config, std::size_t n_actions) {
  if (config.backend == "synthetic")
    return std::make_unique<OpcodeHistogramEncoder>(synthetic_vocabulary(config.synthetic.token_range),
                                                    static_cast<int>(n_actions), config.train.mu_max,
                                                    TokenKind::csv_tokens);
  return std::make_unique<OpcodeHistogramEncoder>(llvm_opcode_vocabulary(), static_cast<int>(n_actions),
                                                  config.train.mu_max, TokenKind::llvm_opcodes);
}

// ---- orchestrator --------------------------------------------------------

namespace {

Architecture architecture(const RunConfig& c, const StateEncoder& enc, const ActionSpace& space) {
  return Architecture{static_cast<int>(enc.dim()), static_cast<int>(space.size()), c.train.blocks, c.train.width};
}

std::string key_text(const TransitionKey& k) { return k.state.hex() + ":" + std::to_string(k.action); }

}  // namespace

Orchestrator::Orchestrator(RunConfig config, BackendFactory factory)
    : config_((config.validate(), std::move(config))),
      factory_(std::move(factory)),
      store_(std::make_unique<Store>(config_.store)),
      catalogs_(load_catalogs(config_)),
      space_(build_space(config_.level, catalogs_)),
      encoder_(make_encoder(config_, space_.size())),
      learner_(std::make_unique<Learner>(architecture(config_, *encoder_, space_), config_.train)),
      replay_(config_.replay_capacity, config_.replay_min_fill),
      queue_(config_.retry_budget),
      rng_(config_.train.seed ^ 0x9E3779B97F4A7C15ULL) {
  if (config_.execution == "inline" && !factory_) throw ConfigError("inline execution needs a backend");
  if (config_.execution == "inline") local_backend_ = factory_();
}

Orchestrator::~Orchestrator() { stop_dispatch(); }

std::optional<Baseline> Orchestrator::baseline(const std::string& program_id) const {
  auto it = baselines_.find(program_id);
  if (it == baselines_.end()) return std::nullopt;
  return it->second;
}

double Orchestrator::best_observed(const std::string& program_id) const {
  auto it = best_.find(program_id);
  return it == best_.end() ? 1.0 : it->second;
}

const Orchestrator::StateInfo& Orchestrator::ensure_state(const AgentState& state) {
  const auto fp = fingerprint(state);
  if (auto it = states_.find(fp); it != states_.end()) return it->second;
  StateInfo info;
  info.state = state;
  info.features = encoder_->encode(state, store_->get_ir(state.ir));
  info.mask = legal_actions(space_, state.history, config_.train.mu_max);
  info.can_stop = !state.history.pending.has_value();
  info.terminal = is_terminal(state.history, config_.train.mu_max);
  return states_.emplace(fp, std::move(info)).first->second;
}

const Orchestrator::StateInfo& Orchestrator::state_info(const Fingerprint& fp) const {
  auto it = states_.find(fp);
  if (it == states_.end()) throw Error("unknown state " + fp.hex());
  return it->second;
}

double Orchestrator::runtime_of(const IrId& ir) const {
  if (auto t = store_->runtime(ir)) return *t;
  throw Error("no stored runtime for IR " + ir.hex());
}

std::vector<double> Orchestrator::q_values(const AgentState& state) {
  return learner_->online().q_values(ensure_state(state).features);
}

void Orchestrator::record_transition(const StateInfo& from, int action, const AgentState& next, double reward,
                                     double runtime_after, bool invoked, bool persist) {
  const TransitionKey key{fingerprint(from.state), action};
  const auto& to = ensure_state(next);
  const auto next_fp = fingerprint(next);
  if (persist) {
    store_->put_state(from.state);
    store_->put_state(next);
    store_->upsert_transition({key, next.ir, reward, runtime_after, now_millis()});
  }
  cache_[key] = Cached{next_fp, reward};
  replay_.insert(Experience{key.state, action, reward, next_fp, transition_discount(invoked, config_.train.gamma),
                            to.terminal});
}

void Orchestrator::start_dispatch() {
  const auto spawn_local = [this](int n) {
    for (int i = 0; i < n; ++i) {
      local_workers_.emplace_back([this, i] {
        auto backend = factory_();
        const std::string id = "local-" + std::to_string(i);
        while (!workers_stop_.load()) {
          auto task = queue_.pull(id, std::chrono::milliseconds(200));
          if (!task) continue;
          queue_.complete(execute_task(*backend, *task, id));
        }
      });
    }
  };
  if (config_.execution == "threads") {
    if (!factory_) throw ConfigError("threads execution needs a backend");
    spawn_local(config_.local_workers);
  } else if (config_.execution == "server") {
    ManagerOptions opts;
    opts.listen = Endpoint::parse(config_.listen);
    server_ = std::make_unique<ManagerServer>(queue_, opts);
    server_->start();
    std::filesystem::create_directories(config_.output);
    std::ofstream(config_.output / "manager.port") << server_->port() << "\n";
    std::cerr << "manager listening on " << opts.listen.host << ":" << server_->port() << "\n";
    if (factory_) spawn_local(config_.local_workers);
  }
}

void Orchestrator::stop_dispatch() {
  workers_stop_.store(true);
  queue_.close();
  for (auto& t : local_workers_)
    if (t.joinable()) t.join();
  local_workers_.clear();
  if (server_) server_->stop();
}

void Orchestrator::submit(Task task) {
  outstanding_.emplace(task.id, task);
  queue_.submit(task);
  if (config_.execution == "inline") {
    auto pulled = queue_.pull("inline", std::chrono::milliseconds(0));
    if (pulled) queue_.complete(execute_task(*local_backend_, *pulled, "inline"));
  }
}

void Orchestrator::run_now(std::vector<Task> tasks) {
  std::set<std::uint64_t> waiting;
  for (auto& t : tasks) {
    waiting.insert(t.id);
    submit(std::move(t));
  }
  auto last_note = std::chrono::steady_clock::now();
  while (!waiting.empty()) {
    for (const auto& r : queue_.wait_results(std::chrono::milliseconds(100))) {
      waiting.erase(r.task_id);
      on_result(r);
    }
    // Results for tasks dropped as duplicates never come back; stop waiting for them.
    std::erase_if(waiting, [&](std::uint64_t id) { return !outstanding_.contains(id); });
    if (std::chrono::steady_clock::now() - last_note > std::chrono::seconds(30)) {
      std::cerr << "waiting for " << waiting.size() << " task(s); " << queue_.pending() << " queued\n";
      last_note = std::chrono::steady_clock::now();
    }
  }
}

Task Orchestrator::make_transition_task(const StateInfo& from, int action, const Invocation& invocation) {
  Task t;
  t.id = next_task_id_++;
  t.kind = Task::Kind::transition;
  t.program_id = from.state.program_id;
  t.policy = config_.policy;
  t.state = fingerprint(from.state);
  t.action = action;
  t.ir = from.state.ir;
  t.ir_body = store_->get_ir(from.state.ir);
  t.invocation = invocation;
  const TransitionKey key{t.state, action};
  in_flight_.insert(key);
  issued_keys_.insert(key);
  ++stats_.tasks_issued;
  return t;
}

void Orchestrator::on_result(const TaskResult& r) {
  auto it = outstanding_.find(r.task_id);
  if (it == outstanding_.end()) {
    ++stats_.duplicates_dropped;
    std::cerr << "dropping result for unknown task " << r.task_id << "\n";
    return;
  }
  const Task task = std::move(it->second);
  outstanding_.erase(it);

  if (task.kind == Task::Kind::baseline) {
    if (r.status != TaskResult::Status::ok) {
      ++stats_.faults;
      store_->record_fault("baseline:" + task.program_id, r.error);
      std::cerr << "baseline of " << task.program_id << " failed: " << r.error << "\n";
      return;
    }
    const IrId base = store_->put_ir(IrArtifact::base(r.base_body));
    const IrId o3 = store_->put_ir(IrArtifact::o3(r.o3_body, base));
    if (!store_->runtime(base)) store_->put_runtime(base, r.base_runtime, config_.policy.describe());
    if (!store_->runtime(o3)) store_->put_runtime(o3, r.o3_runtime, config_.policy.describe());
    Baseline b{task.program_id, base, runtime_of(base), o3, runtime_of(o3)};
    store_->put_baseline(b);
    baselines_[task.program_id] = b;
    ++stats_.results_applied;
    return;
  }

  const TransitionKey key{task.state, task.action};
  in_flight_.erase(key);
  if (r.status != TaskResult::Status::ok) {
    ++stats_.faults;
    store_->record_fault(key_text(key), r.error);
    std::cerr << "transition " << key_text(key) << " failed: " << r.error << "\n";
    return;
  }
  if (cache_.contains(key)) {
    ++stats_.duplicates_dropped;
    return;
  }
  const auto& from = state_info(task.state);
  const IrId result = store_->put_ir(IrArtifact::optimized(r.result_body, from.state.ir, task.action));
  // First measurement of an IR wins so that rewards along any path telescope.
  if (!store_->runtime(result)) store_->put_runtime(result, r.runtime, config_.policy.describe());
  const double after = runtime_of(result);
  const double before = runtime_of(from.state.ir);
  AgentState next = advance_state(from.state, space_.at(task.action), result, config_.train.mu_max);
  next.program_id = task.program_id;
  record_transition(from, task.action, next, reward(before, after), after, true, true);
  if (auto b = baselines_.find(task.program_id); b != baselines_.end())
    best_[task.program_id] = std::max(best_observed(task.program_id), b->second.base_runtime / after);
  ++stats_.results_applied;
}

std::size_t Orchestrator::apply_results() {
  auto results = queue_.drain_results();
  for (const auto& r : results) on_result(r);
  return results.size();
}

void Orchestrator::restore_checkpoint() {
  const auto latest = config_.output / "latest.qck";
  const auto run = store_->load_run(config_.run_id);
  if (!run || run->step == 0 || !std::filesystem::exists(latest)) return;
  auto ck = load_checkpoint(latest);
  const auto& want = learner_->online().architecture();
  const auto& have = ck.net.architecture();
  if (have.input_dim != want.input_dim || have.n_actions != want.n_actions || have.blocks != want.blocks ||
      have.width != want.width)
    throw ConfigError("checkpoint " + latest.string() + " does not match the configured network");
  learner_->set_online(std::move(ck.net));
  learner_->set_step(run->step);
  std::cerr << "resumed " << config_.run_id << " at step " << run->step << "\n";
}

void Orchestrator::init() {
  if (initialized_) return;
  programs_ = load_programs(config_);
  std::vector<std::string> ids;
  for (const auto& p : programs_) ids.push_back(p.id);
  split_ = split_programs(ids, config_.split_train, config_.split_valid, config_.shuffle_seed);
  log_ = std::make_unique<RunLog>(config_.output / "run_log.jsonl");

  restore_checkpoint();
  store_->save_run({config_.run_id, to_json(config_), learner_->step()});

  // Warm start: every stored transition becomes a cached edge and an experience.
  std::size_t loaded = 0;
  for (const auto& rec : store_->transitions()) {
    try {
      auto s = store_->get_state(rec.key.state);
      if (!s || rec.key.action < 0 || static_cast<std::size_t>(rec.key.action) >= space_.size()) continue;
      const bool invoked = std::holds_alternative<Invocation>(decode(space_, rec.key.action, s->history.pending));
      AgentState next = advance_state(*s, space_.at(rec.key.action), rec.result_ir, config_.train.mu_max);
      const auto& from = ensure_state(*s);
      record_transition(from, rec.key.action, next, rec.reward, rec.runtime_after, invoked, false);
      ++loaded;
    } catch (const Error& e) {
      std::cerr << "skipping stored transition " << key_text(rec.key) << ": " << e.what() << "\n";
    }
  }
  if (loaded) std::cerr << "loaded " << loaded << " stored transitions\n";

  start_dispatch();

  std::vector<Task> pending;
  for (const auto& p : programs_) {
    if (auto b = store_->baseline(p.id)) {
      baselines_[p.id] = *b;
      continue;
    }
    Task t;
    t.id = next_task_id_++;
    t.kind = Task::Kind::baseline;
    t.program_id = p.id;
    t.policy = config_.policy;
    t.source = p;
    pending.push_back(std::move(t));
  }
  stats_.baseline_tasks += pending.size();
  run_now(std::move(pending));

  for (const auto& p : programs_) {
    auto b = baselines_.find(p.id);
    if (b == baselines_.end()) continue;
    best_.emplace(p.id, 1.0);
    ensure_state(AgentState::base(b->second.base_ir, p.id));
  }
  for (const auto& rec : store_->transitions())
    if (auto s = store_->get_state(rec.key.state); s && baselines_.contains(s->program_id) && rec.runtime_after > 0)
      best_[s->program_id] =
          std::max(best_observed(s->program_id), baselines_.at(s->program_id).base_runtime / rec.runtime_after);

  const auto has_baseline = [&](const std::string& id) { return baselines_.contains(id); };
  if (std::none_of(split_.train.begin(), split_.train.end(), has_baseline))
    throw Error("no training program has a baseline");
  initialized_ = true;
}

std::optional<AgentState> Orchestrator::cached_step(const Fingerprint& fp, int action) const {
  auto it = cache_.find({fp, action});
  if (it == cache_.end()) return std::nullopt;
  return state_info(it->second.next).state;
}

std::vector<Task> Orchestrator::explore_step() {
  std::vector<std::string> candidates;
  for (const auto& id : split_.train)
    if (baselines_.contains(id)) candidates.push_back(id);
  const std::size_t batch =
      config_.explore_batch > 0 ? static_cast<std::size_t>(config_.explore_batch) : std::min<std::size_t>(32, candidates.size());
  std::vector<std::string> chosen;
  std::sample(candidates.begin(), candidates.end(), std::back_inserter(chosen), batch, rng_);

  const double eps = epsilon(config_.train, learner_->step());
  std::vector<Task> emitted;
  for (const auto& id : chosen) {
    AgentState state = AgentState::base(baselines_.at(id).base_ir, id);
    for (;;) {
      const auto& info = ensure_state(state);
      std::vector<int> legal;
      for (std::size_t i = 0; i < info.mask.size(); ++i)
        if (info.mask[i]) legal.push_back(static_cast<int>(i));
      if (legal.empty()) break;
      int a;
      if (std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < eps) {
        a = legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng_)];
      } else {
        const auto q = learner_->online().q_values(info.features);
        a = *legal_argmax(q, info.mask);
        if (info.can_stop && q[static_cast<std::size_t>(a)] <= 0.0) break;
      }
      const Fingerprint fp = fingerprint(state);
      if (auto next = cached_step(fp, a)) {
        state = *next;
        state.program_id = id;
        continue;
      }
      const auto decoded = decode(space_, a, state.history.pending);
      if (std::holds_alternative<PendingSelection>(decoded)) {
        AgentState next = advance_state(state, space_.at(a), state.ir, config_.train.mu_max);
        record_transition(info, a, next, 0.0, runtime_of(state.ir), false, true);
        ++stats_.local_transitions;
        state = next;
        continue;
      }
      if (in_flight_.contains({fp, a})) break;
      Task t = make_transition_task(info, a, std::get<Invocation>(decoded));
      t.program_id = id;
      emitted.push_back(t);
      submit(std::move(t));
      break;
    }
  }
  return emitted;
}

AgentState Orchestrator::step_synchronously(const AgentState& state, int action) {
  const Fingerprint fp = fingerprint(state);
  if (auto next = cached_step(fp, action)) return *next;
  const auto& info = ensure_state(state);
  const auto decoded = decode(space_, action, state.history.pending);
  if (std::holds_alternative<PendingSelection>(decoded)) {
    AgentState next = advance_state(state, space_.at(action), state.ir, config_.train.mu_max);
    record_transition(info, action, next, 0.0, runtime_of(state.ir), false, true);
    ++stats_.local_transitions;
    return next;
  }
  const TransitionKey key{fp, action};
  if (in_flight_.contains(key)) {
    while (in_flight_.contains(key))
      for (const auto& r : queue_.wait_results(std::chrono::milliseconds(100))) on_result(r);
  } else {
    run_now({make_transition_task(info, action, std::get<Invocation>(decoded))});
  }
  if (auto next = cached_step(fp, action)) return *next;
  throw EnvironmentFault("transition " + key_text(key) + " failed");
}

Trajectory Orchestrator::greedy_rollout(const std::string& program_id) {
  const auto b = baselines_.find(program_id);
  if (b == baselines_.end()) throw Error("program " + program_id + " has no baseline");
  const AgentState start = AgentState::base(b->second.base_ir, program_id);
  return rollout(
      space_, config_.train.mu_max, start, [this](const AgentState& s) { return q_values(s); },
      [this, &program_id](const AgentState& s, int a) {
        AgentState next = step_synchronously(s, a);
        next.program_id = program_id;
        return next;
      });
}

EvalReport Orchestrator::evaluate() {
  EvalReport report;
  report.step = learner_->step();
  const std::pair<const char*, const std::vector<std::string>*> sets[] = {{"train", &split_.train},
                                                                          {"valid", &split_.valid}};
  for (const auto& [set, ids] : sets) {
    for (const auto& id : *ids) {
      auto b = baselines_.find(id);
      if (b == baselines_.end()) {
        report.faults[id] = "no baseline";
        continue;
      }
      const auto t = greedy_rollout(id);
      if (t.faulted) {
        report.faults[id] = t.fault;
        continue;
      }
      EvalEntry e;
      e.program_id = id;
      e.set = set;
      e.actions = t.actions;
      e.agent_speedup = b->second.base_runtime / runtime_of(t.final_state().ir);
      e.o3_speedup = b->second.base_runtime / b->second.o3_runtime;
      best_[id] = std::max(best_observed(id), e.agent_speedup);
      e.best_observed = best_[id];
      report.programs.push_back(std::move(e));
    }
  }
  if (log_) log_eval(report);
  return report;
}

void Orchestrator::log_eval(const EvalReport& report) {
  const auto step = report.step;
  std::ofstream table(config_.output / ("eval_" + std::to_string(step) + ".tsv"));
  table << "set\tprogram\tsequence\to3_speedup\tagent_speedup\tratio\tbest_observed\n";
  for (const auto& e : report.programs) {
    const std::string phase = "eval:" + e.set;
    log_->write({step, phase, e.program_id, "agent_speedup", e.agent_speedup});
    log_->write({step, phase, e.program_id, "o3_speedup", e.o3_speedup});
    log_->write({step, phase, e.program_id, "best_speedup", e.best_observed});
    log_->write({step, phase, e.program_id, "sequence", format_sequence(e.actions)});
    table << e.set << "\t" << e.program_id << "\t" << format_sequence(e.actions) << "\t" << e.o3_speedup << "\t"
          << e.agent_speedup << "\t" << format_ratio(e.agent_speedup / e.o3_speedup) << "\t" << e.best_observed << "\n";
  }
  for (const auto& [id, why] : report.faults) log_->write({step, "eval", id, "fault", why});
  for (const char* set : {"train", "valid"}) {
    const auto agent = report.geomean(set, EvalReport::Metric::agent);
    const auto o3 = report.geomean(set, EvalReport::Metric::o3);
    const auto best = report.geomean(set, EvalReport::Metric::best);
    if (!agent) continue;
    log_->write({step, std::string("eval:") + set, "", "geomean_agent", *agent});
    log_->write({step, std::string("eval:") + set, "", "geomean_o3", *o3});
    log_->write({step, std::string("eval:") + set, "", "geomean_best", *best});
    std::cerr << "step " << step << " " << set << ": agent " << format_ratio(*agent) << " O3 " << format_ratio(*o3)
              << " best " << format_ratio(*best) << "\n";
  }
}

void Orchestrator::checkpoint(bool numbered) {
  Checkpoint ck{learner_->online(), {}};
  ck.metadata = {{"run_id", config_.run_id},
                 {"step", std::to_string(learner_->step())},
                 {"level", std::string(to_string(config_.level))},
                 {"mu_max", std::to_string(config_.train.mu_max)},
                 {"backend", config_.backend},
                 {"catalog", config_.catalog},
                 {"n_actions", std::to_string(space_.size())},
                 {"token_range", std::to_string(config_.synthetic.token_range)},
                 {"synthetic_actions", std::to_string(config_.synthetic.n_actions)}};
  std::filesystem::create_directories(config_.output);
  save_checkpoint(config_.output / "latest.qck", ck);
  if (numbered) save_checkpoint(config_.output / ("ckpt_" + std::to_string(learner_->step()) + ".qck"), ck);
  store_->save_run({config_.run_id, to_json(config_), learner_->step()});
}

bool Orchestrator::train_step() {
  auto batch = replay_.sample(static_cast<std::size_t>(config_.train.batch_size), rng_);
  if (!batch) return false;
  std::vector<TrainingSample> samples;
  samples.reserve(batch->size());
  for (const auto& e : *batch) {
    const auto& s = state_info(e.s);
    const auto& n = state_info(e.s_next);
    samples.push_back({s.features, e.a, e.r, e.discount, e.terminal, n.features, n.mask, n.can_stop});
  }
  const double loss = learner_->train_step(samples);
  if (log_ && learner_->step() % 100 == 0) log_->write({learner_->step(), "train", "", "loss", loss});
  return true;
}

void Orchestrator::train() {
  init();
  const auto batch_target = static_cast<std::size_t>(
      config_.explore_batch > 0 ? config_.explore_batch : std::min<std::size_t>(32, split_.train.size()));
  std::int64_t last_eval = -1;
  // Rounds in a row that found nothing new while replay was still filling.
  // A single empty round only means the sampled walks hit cached transitions.
  int idle_rounds = 0;
  while (learner_->step() < config_.total_steps) {
    apply_results();
    const bool ready = replay_.ready(static_cast<std::size_t>(config_.train.batch_size));
    if ((!ready || learner_->step() % config_.explore_every == 0) && outstanding_.size() < batch_target) {
      const auto emitted = explore_step();
      const bool idle = !ready && emitted.empty() && outstanding_.empty() && queue_.outstanding() == 0 &&
                        !replay_.ready(static_cast<std::size_t>(config_.train.batch_size));
      idle_rounds = idle ? idle_rounds + 1 : 0;
      if (idle_rounds >= 1000) {
        if (replay_.size() == 0) throw Error("exploration found no transitions");
        throw Error("exploration exhausted with " + std::to_string(replay_.size()) +
                    " experiences, fewer than replay_min_fill/batch_size");
      }
    }
    if (!train_step()) {
      if (!outstanding_.empty())
        for (const auto& r : queue_.wait_results(std::chrono::milliseconds(50))) on_result(r);
      continue;
    }
    if (learner_->step() % config_.train.delta == 0) {
      evaluate();
      checkpoint(true);
      last_eval = learner_->step();
    }
  }
  // Let in-flight work land so every issued task is accounted for.
  while (!outstanding_.empty())
    for (const auto& r : queue_.wait_results(std::chrono::milliseconds(100))) on_result(r);
  if (last_eval != learner_->step()) {
    evaluate();
    checkpoint(false);
  }
}

}  // namespace qpass
