#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "qpass/action_space.hpp"
#include "qpass/agent.hpp"
#include "qpass/encoder.hpp"
#include "qpass/manager_server.hpp"
#include "qpass/replay_memory.hpp"
#include "qpass/run_config.hpp"
#include "qpass/run_log.hpp"
#include "qpass/store.hpp"
#include "qpass/task_queue.hpp"

namespace qpass {

// ---- rollout -------------------------------------------------------------

struct RolloutPolicy {
  bool greedy = true;
  double epsilon = 0.0;         // used when !greedy
  std::mt19937_64* rng = nullptr;  // required when !greedy
};

struct Trajectory {
  std::vector<int> actions;
  std::vector<AgentState> states;  // states[0] is the start state
  bool faulted = false;
  std::string fault;

  const AgentState& final_state() const { return states.back(); }
  /// Number of pass-level actions taken.
  int pass_actions() const { return final_state().history.pass_count - states.front().history.pass_count; }
};

using QFunction = std::function<std::vector<double>(const AgentState&)>;
/// Applies one action; may throw EnvironmentFault.
using StepFunction = std::function<AgentState(const AgentState&, int)>;

/// Acts until the budget is spent or, with no selection pending, the best
/// legal Q is not positive. An exploratory (ε) pick never stops the rollout.
/// A fault from `step` truncates the trajectory.
Trajectory rollout(const ActionSpace& space, int mu_max, const AgentState& start, const QFunction& q,
                   const StepFunction& step, const RolloutPolicy& policy = {});

/// `4→5→0`; empty for an empty sequence.
std::string format_sequence(const std::vector<int>& actions);

// ---- programs and split --------------------------------------------------

/// Generated `prog_000..` sources or the C/C++ files of a directory, sorted by id,
/// minus `exclude`. Throws ConfigError when nothing remains.
std::vector<ProgramSource> load_programs(const RunConfig& config);

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> valid;
};

/// Seeded shuffle; validation takes ceil(n * v / (t + v)), training the rest.
Split split_programs(std::vector<std::string> ids, int train_ratio, int valid_ratio, std::uint64_t seed);

// ---- evaluation report ---------------------------------------------------

struct EvalEntry {
  std::string program_id;
  std::string set;  // "train" or "valid"
  std::vector<int> actions;
  double agent_speedup = 0.0;
  double o3_speedup = 0.0;
  double best_observed = 0.0;

  friend bool operator==(const EvalEntry&, const EvalEntry&) = default;
};

struct EvalReport {
  std::int64_t step = 0;
  std::vector<EvalEntry> programs;
  std::map<std::string, std::string> faults;  // program id → message

  enum class Metric { agent, o3, best };
  std::optional<double> geomean(const std::string& set, Metric metric) const;
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// ---- orchestrator --------------------------------------------------------

using BackendFactory = std::function<std::unique_ptr<Backend>()>;

struct OrchestratorStats {
  std::uint64_t tasks_issued = 0;        // transition tasks
  std::uint64_t baseline_tasks = 0;
  std::uint64_t results_applied = 0;
  std::uint64_t duplicates_dropped = 0;
  std::uint64_t faults = 0;
  std::uint64_t local_transitions = 0;   // intermediate selections, no backend call
};

/// Learner and manager of one run: owns the store, replay memory, networks,
/// transition cache and task dispatch.
class Orchestrator {
 public:
  /// `factory` builds the backend used for inline execution and local
  /// worker threads; it may be empty for server execution without local workers.
  Orchestrator(RunConfig config, BackendFactory factory);
  ~Orchestrator();
  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  /// Loads programs, splits them, loads the store into memory, repopulates
  /// replay, restores a matching checkpoint, starts dispatch and waits for
  /// every baseline.
  void init();

  /// One exploration round; returns the tasks it emitted (already submitted).
  std::vector<Task> explore_step();
  /// Applies every result currently available. Returns the count applied.
  std::size_t apply_results();
  void on_result(const TaskResult& result);
  /// One learner step; false while replay is not ready.
  bool train_step();
  EvalReport evaluate();
  /// Runs until `total_steps` train steps, evaluating and checkpointing every δ.
  void train();

  /// Greedy rollout of `program_id` from its base state, executing cache misses synchronously.
  Trajectory greedy_rollout(const std::string& program_id);

  // inspection
  const RunConfig& config() const { return config_; }
  const Split& split() const { return split_; }
  const ActionSpace& space() const { return space_; }
  Store& store() { return *store_; }
  const ReplayMemory& replay() const { return replay_; }
  Learner& learner() { return *learner_; }
  TaskQueue& queue() { return queue_; }
  const OrchestratorStats& stats() const { return stats_; }
  std::int64_t step() const { return learner_->step(); }
  /// Listening port in server execution, else 0.
  int manager_port() const { return server_ ? server_->port() : 0; }
  std::optional<Baseline> baseline(const std::string& program_id) const;
  double best_observed(const std::string& program_id) const;
  /// Transition keys of every transition task issued so far.
  const std::set<TransitionKey>& issued_keys() const { return issued_keys_; }
  std::vector<double> q_values(const AgentState& state);
  void stop_dispatch();

 private:
  struct StateInfo {
    AgentState state;
    std::vector<double> features;
    std::vector<bool> mask;
    bool can_stop = true;
    bool terminal = false;
  };
  struct Cached {
    Fingerprint next;
    double reward = 0.0;
  };

  const StateInfo& ensure_state(const AgentState& state);
  const StateInfo& state_info(const Fingerprint& fp) const;
  double runtime_of(const IrId& ir) const;
  void record_transition(const StateInfo& from, int action, const AgentState& next, double reward, double runtime_after,
                         bool invoked, bool persist);
  void start_dispatch();
  void submit(Task task);
  /// Submits and blocks until these tasks have results, applying everything that arrives.
  void run_now(std::vector<Task> tasks);
  Task make_transition_task(const StateInfo& from, int action, const Invocation& invocation);
  std::optional<AgentState> cached_step(const Fingerprint& fp, int action) const;
  AgentState step_synchronously(const AgentState& state, int action);
  void log_eval(const EvalReport& report);
  void checkpoint(bool numbered);
  void restore_checkpoint();

  RunConfig config_;
  BackendFactory factory_;
  std::unique_ptr<Backend> local_backend_;
  std::unique_ptr<Store> store_;
  Catalogs catalogs_;
  ActionSpace space_;
  std::unique_ptr<StateEncoder> encoder_;
  std::unique_ptr<Learner> learner_;
  ReplayMemory replay_;
  TaskQueue queue_;
  std::unique_ptr<ManagerServer> server_;
  std::vector<std::thread> local_workers_;
  std::atomic<bool> workers_stop_{false};
  std::unique_ptr<RunLog> log_;
  std::mt19937_64 rng_;

  std::vector<ProgramSource> programs_;
  Split split_;
  std::map<std::string, Baseline> baselines_;
  std::map<std::string, double> best_;
  std::unordered_map<Fingerprint, StateInfo> states_;
  std::map<TransitionKey, Cached> cache_;
  std::map<std::uint64_t, Task> outstanding_;
  std::set<TransitionKey> in_flight_;
  std::set<TransitionKey> issued_keys_;
  std::uint64_t next_task_id_ = 1;
  OrchestratorStats stats_;
  bool initialized_ = false;
};

/// Builds the backend named in `config` ("synthetic" or "llvm").
std::unique_ptr<Backend> make_backend(const RunConfig& config);
/// The catalogs selected by `config.catalog`.
Catalogs load_catalogs(const RunConfig& config);
/// Encoder matching `config`'s backend and the action space size.
std::unique_ptr<OpcodeHistogramEncoder> make_encoder(const RunConfig& config, std::size_t n_actions);

}  // namespace qpass
