#include "qpass/environment.hpp"

#include "qpass/errors.hpp"

namespace qpass {

bool is_terminal(const ActionHistory& history, int mu_max) {
  return !history.pending && history.pass_count >= mu_max;
}

double transition_discount(bool invoked, double gamma) { return invoked ? gamma : 1.0; }

InvocationOutcome execute_invocation(Backend& backend, const BenchmarkPolicy& policy, const std::string& body,
                                     const Invocation& invocation, const std::string& program_id) {
  InvocationOutcome out;
  out.body = backend.optimize(body, invocation);
  const auto m = measure_runtime(backend, out.body, program_id, policy);
  out.runtime = m.median_seconds;
  out.repetitions = m.repetitions;
  return out;
}

AgentState advance_state(const AgentState& state, const ActionSpec& action, const IrId& result_ir, int mu_max) {
  AgentState next = state;
  next.history = append_action(state.history, action, mu_max);
  next.ir = result_ir;
  return next;
}

Environment::Environment(Backend& backend, BenchmarkPolicy policy, const ActionSpace& space, int mu_max, Store& store)
    : backend_(backend), policy_(std::move(policy)), space_(space), mu_max_(mu_max), store_(store) {
  policy_.validate();
}

double Environment::runtime_of(const IrId& ir, const std::string& program_id) const {
  if (auto t = store_.runtime(ir)) return *t;
  const auto m = measure_runtime(backend_, store_.get_ir(ir), program_id, policy_);
  store_.put_runtime(ir, m.median_seconds, policy_.describe());
  return m.median_seconds;
}

StepResult Environment::step(const AgentState& state, int action) const {
  const auto mask = legal_actions(space_, state.history, mu_max_);
  if (action < 0 || static_cast<std::size_t>(action) >= mask.size() || !mask[static_cast<std::size_t>(action)])
    throw IllegalAction("action " + std::to_string(action) + " is not legal in this state");
  const ActionSpec& spec = space_.at(action);
  const Decoded decoded = decode(space_, action, state.history.pending);

  StepResult result;
  if (std::holds_alternative<PendingSelection>(decoded)) {
    result.next = advance_state(state, spec, state.ir, mu_max_);
    result.reward = 0.0;
    result.invoked = false;
    result.terminal = is_terminal(result.next.history, mu_max_);
    result.runtime_after = runtime_of(state.ir, state.program_id);
    return result;
  }

  const Invocation& inv = std::get<Invocation>(decoded);
  const double before = runtime_of(state.ir, state.program_id);
  const std::string body = store_.get_ir(state.ir);
  const auto outcome = execute_invocation(backend_, policy_, body, inv, state.program_id);
  const IrId next_ir = store_.put_ir(IrArtifact::optimized(outcome.body, state.ir, action));
  store_.put_runtime(next_ir, outcome.runtime, policy_.describe());

  result.next = advance_state(state, spec, next_ir, mu_max_);
  result.reward = reward(before, outcome.runtime);
  result.invoked = true;
  result.terminal = is_terminal(result.next.history, mu_max_);
  result.invocation = inv;
  result.runtime_after = outcome.runtime;
  return result;
}

Baseline baseline_init(Backend& backend, const BenchmarkPolicy& policy, const ProgramSource& source, Store& store) {
  if (auto b = store.baseline(source.id)) return *b;
  const std::string base_body = backend.lower_source(source);
  const IrId base_id = store.put_ir(IrArtifact::base(base_body));
  const auto base_m = measure_runtime(backend, base_body, source.id, policy);
  const std::string o3_body = backend.optimize_o3(base_body);
  const IrId o3_id = store.put_ir(IrArtifact::o3(o3_body, base_id));
  const auto o3_m = measure_runtime(backend, o3_body, source.id, policy);
  store.put_runtime(base_id, base_m.median_seconds, policy.describe());
  store.put_runtime(o3_id, o3_m.median_seconds, policy.describe());
  Baseline b{source.id, base_id, base_m.median_seconds, o3_id, o3_m.median_seconds};
  store.put_baseline(b);
  return b;
}

}  // namespace qpass
