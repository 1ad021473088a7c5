#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qpass/action.hpp"
#include "qpass/digest.hpp"
#include "qpass/ir.hpp"

namespace qpass {

struct ActionHistory {
  std::vector<int> entries;
  /// Pass-level entries only; this is what the μ budget counts.
  int pass_count = 0;
  std::optional<PendingSelection> pending;

  friend bool operator==(const ActionHistory&, const ActionHistory&) = default;
};

/// Appends `action` to a copy of `history`.
///
/// Pass-level actions consume one unit of the budget and, for a level-L pass
/// with parameters, open a pending selection. Parameter values bind the next
/// remaining parameter of the pending pass; they are recorded in `entries`
/// but never consume budget.
///
/// Throws BudgetExhausted when a pass-level action arrives at `pass_count == mu_max`,
/// IllegalAction when the action does not fit the pending selection.
ActionHistory append_action(const ActionHistory& history, const ActionSpec& action, int mu_max);

struct AgentState {
  IrId ir;
  ActionHistory history;
  std::string program_id;

  static AgentState base(const IrId& ir, std::string program_id);

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

using Fingerprint = Digest;

/// Hash over (ir id, history entries, pending selection). The program id is
/// deliberately not part of it: equal IR and history are the same state.
Fingerprint fingerprint(const AgentState& state);

std::string serialize_state(const AgentState& state);
AgentState deserialize_state(const std::string& text);

struct Experience {
  Fingerprint s;
  int a = 0;
  double r = 0.0;
  Fingerprint s_next;
  double discount = 1.0;
  bool terminal = false;
};

struct TransitionKey {
  Fingerprint state;
  int action = 0;

  friend bool operator==(const TransitionKey&, const TransitionKey&) = default;
  friend auto operator<=>(const TransitionKey&, const TransitionKey&) = default;
};

struct TransitionRecord {
  TransitionKey key;
  IrId result_ir;
  double reward = 0.0;
  double runtime_after = 0.0;
  std::int64_t measured_at = 0;  // unix milliseconds
};

std::int64_t now_millis();

}  // namespace qpass

template <>
struct std::hash<qpass::TransitionKey> {
  std::size_t operator()(const qpass::TransitionKey& k) const noexcept {
    return k.state.prefix64() ^ (static_cast<std::size_t>(k.action) * 0x9E3779B97F4A7C15ull);
  }
};
