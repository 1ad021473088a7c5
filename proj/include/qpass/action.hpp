#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qpass {

/// Abstraction level of an action space: fixed pass sub-sequences (H),
/// single passes with defaults (M), single passes plus parameter values (L).
enum class Level { H, M, L };

std::string_view to_string(Level level);
Level parse_level(std::string_view text);

using FlagAssignment = std::pair<std::string, std::string>;

struct ActionSpec {
  enum class Kind { pass_sequence, single_pass, parameter_value };

  int id = 0;
  Level level = Level::H;
  Kind kind = Kind::pass_sequence;
  /// pass_sequence: the full list; otherwise exactly one pass.
  std::vector<std::string> passes;
  /// single_pass at level L: the pass's tunable parameters in catalog order.
  std::vector<std::string> parameters;
  /// parameter_value only.
  std::string parameter;
  std::string value;

  const std::string& pass() const { return passes.front(); }
  bool is_pass_level() const { return kind != Kind::parameter_value; }
};

/// One optimizer call: ordered pass names plus flag assignments.
struct Invocation {
  std::vector<std::string> passes;
  std::vector<FlagAssignment> flags;

  /// Stable textual form, e.g. `licm{disable-licm-promotion=false}`.
  std::string canonical() const;

  friend bool operator==(const Invocation&, const Invocation&) = default;
};

/// A level-L pass whose parameters are still being chosen.
struct PendingSelection {
  std::string pass;
  std::vector<FlagAssignment> chosen;
  std::vector<std::string> remaining;  // never empty while stored

  friend bool operator==(const PendingSelection&, const PendingSelection&) = default;
};

}  // namespace qpass
