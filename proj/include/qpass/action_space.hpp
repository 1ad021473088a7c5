#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qpass/action.hpp"
#include "qpass/state.hpp"

namespace qpass {

struct ParameterEntry {
  std::string pass;
  std::string parameter;
  std::vector<std::string> values;  // values[0] is the default
};

/// Pass and parameter catalogs as shipped in data files.
///
/// `o3_actions.tsv`:     `action_index <tab> pass_name`, one pass slot per line.
/// `pass_parameters.tsv`: `pass <tab> parameter <tab> v1,v2,...`.
/// `analysis_passes.txt`: one name per line; these appear in H actions but
///                        are not transformation passes, so M/L omit them.
struct Catalogs {
  std::vector<std::vector<std::string>> sequences;
  std::vector<std::string> analysis_passes;
  std::vector<ParameterEntry> parameters;

  static Catalogs parse(const std::string& sequences_text, const std::string& parameters_text,
                        const std::string& analysis_text = {});
  static Catalogs load(const std::filesystem::path& dir);
  /// The catalogs from the repository's data/catalog directory.
  static Catalogs shipped();
  /// `n` single-pass sequences named `syn0..syn<n-1>`, no parameters.
  static Catalogs synthetic(int n);
};

class ActionSpace {
 public:
  Level level() const { return level_; }
  std::size_t size() const { return actions_.size(); }
  const ActionSpec& at(int id) const { return actions_.at(static_cast<std::size_t>(id)); }
  const std::vector<ActionSpec>& actions() const { return actions_; }
  /// Transformation passes in first-appearance order.
  const std::vector<std::string>& pass_catalog() const { return passes_; }
  const std::vector<ParameterEntry>& parameter_catalog() const { return parameters_; }
  /// Action ids for the values of (pass, parameter), in catalog value order.
  const std::vector<int>& value_actions(const std::string& pass, const std::string& parameter) const;
  int pass_action(const std::string& pass) const;

 private:
  friend ActionSpace build_space(Level, const Catalogs&);
  Level level_ = Level::H;
  std::vector<ActionSpec> actions_;
  std::vector<std::string> passes_;
  std::vector<ParameterEntry> parameters_;
  std::map<std::pair<std::string, std::string>, std::vector<int>> value_index_;
  std::map<std::string, int> pass_index_;
};

ActionSpace build_space(Level level, const Catalogs& catalogs);

/// Legality mask for `history` under a pass-level budget of `mu_max`.
std::vector<bool> legal_actions(const ActionSpace& space, const ActionHistory& history, int mu_max);

using Decoded = std::variant<Invocation, PendingSelection>;

/// Throws IllegalAction if the action cannot follow `pending`.
Decoded decode(const ActionSpace& space, int action_id, const std::optional<PendingSelection>& pending);

}  // namespace qpass
