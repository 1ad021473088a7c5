#pragma once

#include <optional>
#include <string>

#include "qpass/action_space.hpp"
#include "qpass/backend.hpp"
#include "qpass/state.hpp"
#include "qpass/store.hpp"

namespace qpass {

/// No legal continuation: budget spent and nothing pending.
bool is_terminal(const ActionHistory& history, int mu_max);

/// Discount carried by a transition: 1 when it did not invoke the optimizer
/// (an intermediate level-L selection), otherwise `gamma`.
double transition_discount(bool invoked, double gamma);

struct StepResult {
  AgentState next;
  double reward = 0.0;
  bool invoked = false;   // false for intermediate parameter selections
  bool terminal = false;
  std::optional<Invocation> invocation;
  double runtime_after = 0.0;
};

/// Result of running one invocation on a body, as a worker would.
struct InvocationOutcome {
  std::string body;
  double runtime = 0.0;
  int repetitions = 0;
};

InvocationOutcome execute_invocation(Backend& backend, const BenchmarkPolicy& policy, const std::string& body,
                                     const Invocation& invocation, const std::string& program_id);

/// Next state after `action` when the resulting IR is already known
/// (identical IR for intermediate selections).
AgentState advance_state(const AgentState& state, const ActionSpec& action, const IrId& result_ir, int mu_max);

class Environment {
 public:
  Environment(Backend& backend, BenchmarkPolicy policy, const ActionSpace& space, int mu_max, Store& store);

  /// Applies `action` to `state`. Intermediate level-L selections return
  /// reward 0 without touching the backend; everything else optimizes,
  /// measures and returns ln(T(state) / T(next)).
  StepResult step(const AgentState& state, int action) const;

  /// Stored runtime of `ir`, measuring and storing it on a miss.
  double runtime_of(const IrId& ir, const std::string& program_id) const;

  const ActionSpace& space() const { return space_; }
  int mu_max() const { return mu_max_; }

 private:
  Backend& backend_;
  BenchmarkPolicy policy_;
  const ActionSpace& space_;
  int mu_max_;
  Store& store_;
};

/// Produces and benchmarks the base and O3 IR of `source`, persisting both.
/// Returns the stored baseline without any backend call when present.
/// Lowering or measurement failures propagate as EnvironmentFault.
Baseline baseline_init(Backend& backend, const BenchmarkPolicy& policy, const ProgramSource& source, Store& store);

}  // namespace qpass
