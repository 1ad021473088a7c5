#include "qpass/action_space.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "qpass/errors.hpp"

namespace qpass {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

bool skippable(const std::string& line) {
  const std::string t = trim(line);
  return t.empty() || t[0] == '#';
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open catalog file " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Catalogs Catalogs::parse(const std::string& sequences_text, const std::string& parameters_text,
                         const std::string& analysis_text) {
  Catalogs c;
  std::istringstream seq(sequences_text);
  std::string line;
  int lineno = 0;
  while (std::getline(seq, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skippable(line)) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 2 || trim(cols[1]).empty())
      throw ConfigError("sequence catalog line " + std::to_string(lineno) + ": expected 'action_index<TAB>pass', got '" +
                        line + "'");
    int idx = -1;
    try {
      std::size_t used = 0;
      idx = std::stoi(cols[0], &used);
      if (used != trim(cols[0]).size()) idx = -1;
    } catch (const std::exception&) {
      idx = -1;
    }
    if (idx < 0)
      throw ConfigError("sequence catalog line " + std::to_string(lineno) + ": bad action index '" + cols[0] + "'");
    if (static_cast<std::size_t>(idx) > c.sequences.size())
      throw ConfigError("sequence catalog line " + std::to_string(lineno) + ": action index " + std::to_string(idx) +
                        " skips index " + std::to_string(c.sequences.size()));
    if (static_cast<std::size_t>(idx) + 1 < c.sequences.size())
      throw ConfigError("sequence catalog line " + std::to_string(lineno) + ": action " + std::to_string(idx) +
                        " is not contiguous");
    if (static_cast<std::size_t>(idx) == c.sequences.size()) c.sequences.emplace_back();
    c.sequences[idx].push_back(trim(cols[1]));
  }
  if (c.sequences.empty()) throw ConfigError("sequence catalog is empty");

  std::istringstream an(analysis_text);
  while (std::getline(an, line))
    if (!skippable(line)) c.analysis_passes.push_back(trim(line));

  std::istringstream par(parameters_text);
  lineno = 0;
  std::set<std::pair<std::string, std::string>> seen;
  while (std::getline(par, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skippable(line)) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 3)
      throw ConfigError("parameter catalog line " + std::to_string(lineno) +
                        ": expected 'pass<TAB>parameter<TAB>v1,v2,...', got '" + line + "'");
    ParameterEntry e{trim(cols[0]), trim(cols[1]), {}};
    for (auto& v : split(cols[2], ',')) {
      v = trim(v);
      if (v.empty())
        throw ConfigError("parameter catalog line " + std::to_string(lineno) + ": empty value in '" + line + "'");
      e.values.push_back(v);
    }
    if (e.pass.empty() || e.parameter.empty() || e.values.empty())
      throw ConfigError("parameter catalog line " + std::to_string(lineno) + ": incomplete entry '" + line + "'");
    if (!seen.emplace(e.pass, e.parameter).second)
      throw ConfigError("parameter catalog line " + std::to_string(lineno) + ": duplicate parameter " + e.pass + ":" +
                        e.parameter);
    c.parameters.push_back(std::move(e));
  }
  return c;
}

Catalogs Catalogs::load(const std::filesystem::path& dir) {
  const auto analysis = dir / "analysis_passes.txt";
  return parse(read_file(dir / "o3_actions.tsv"), read_file(dir / "pass_parameters.tsv"),
               std::filesystem::exists(analysis) ? read_file(analysis) : std::string{});
}

Catalogs Catalogs::shipped() { return load(std::filesystem::path(QPASS_DATA_DIR) / "catalog"); }

Catalogs Catalogs::synthetic(int n) {
  Catalogs c;
  for (int i = 0; i < n; ++i) c.sequences.push_back({"syn" + std::to_string(i)});
  return c;
}

const std::vector<int>& ActionSpace::value_actions(const std::string& pass, const std::string& parameter) const {
  static const std::vector<int> kNone;
  const auto it = value_index_.find({pass, parameter});
  return it == value_index_.end() ? kNone : it->second;
}

int ActionSpace::pass_action(const std::string& pass) const {
  const auto it = pass_index_.find(pass);
  return it == pass_index_.end() ? -1 : it->second;
}

ActionSpace build_space(Level level, const Catalogs& catalogs) {
  ActionSpace space;
  space.level_ = level;

  const std::set<std::string> analysis(catalogs.analysis_passes.begin(), catalogs.analysis_passes.end());
  std::set<std::string> seen;
  for (const auto& seq : catalogs.sequences)
    for (const auto& p : seq)
      if (!analysis.count(p) && seen.insert(p).second) space.passes_.push_back(p);

  for (const auto& e : catalogs.parameters)
    if (!seen.count(e.pass))
      throw ConfigError("parameter catalog entry " + e.pass + ":" + e.parameter +
                        " names a pass absent from the sequence catalog");
  space.parameters_ = catalogs.parameters;

  auto push = [&](ActionSpec spec) {
    spec.id = static_cast<int>(space.actions_.size());
    spec.level = level;
    space.actions_.push_back(std::move(spec));
  };

  switch (level) {
    case Level::H:
      for (const auto& seq : catalogs.sequences) push({0, level, ActionSpec::Kind::pass_sequence, seq, {}, {}, {}});
      break;
    case Level::M:
      for (const auto& p : space.passes_) {
        space.pass_index_[p] = static_cast<int>(space.actions_.size());
        push({0, level, ActionSpec::Kind::single_pass, {p}, {}, {}, {}});
      }
      break;
    case Level::L: {
      // Group parameter entries by pass, keeping first-appearance order of passes.
      std::vector<std::string> pass_order;
      std::map<std::string, std::vector<const ParameterEntry*>> by_pass;
      for (const auto& e : catalogs.parameters) {
        if (!by_pass.count(e.pass)) pass_order.push_back(e.pass);
        by_pass[e.pass].push_back(&e);
      }
      for (const auto& p : space.passes_) {
        ActionSpec spec{0, level, ActionSpec::Kind::single_pass, {p}, {}, {}, {}};
        for (const auto* e : by_pass[p]) spec.parameters.push_back(e->parameter);
        space.pass_index_[p] = static_cast<int>(space.actions_.size());
        push(std::move(spec));
      }
      for (const auto& p : pass_order)
        for (const auto* e : by_pass[p])
          for (const auto& v : e->values) {
            space.value_index_[{p, e->parameter}].push_back(static_cast<int>(space.actions_.size()));
            push({0, level, ActionSpec::Kind::parameter_value, {p}, {}, e->parameter, v});
          }
      break;
    }
  }
  return space;
}

std::vector<bool> legal_actions(const ActionSpace& space, const ActionHistory& history, int mu_max) {
  std::vector<bool> mask(space.size(), false);
  if (history.pending) {
    for (int id : space.value_actions(history.pending->pass, history.pending->remaining.front())) mask[id] = true;
    return mask;
  }
  if (history.pass_count >= mu_max) return mask;
  for (const auto& a : space.actions())
    if (a.is_pass_level()) mask[a.id] = true;
  return mask;
}

Decoded decode(const ActionSpace& space, int action_id, const std::optional<PendingSelection>& pending) {
  if (action_id < 0 || static_cast<std::size_t>(action_id) >= space.size())
    throw IllegalAction("action id " + std::to_string(action_id) + " out of range");
  const ActionSpec& a = space.at(action_id);

  if (a.kind == ActionSpec::Kind::parameter_value) {
    if (!pending || pending->pass != a.pass() || pending->remaining.front() != a.parameter)
      throw IllegalAction("parameter action " + std::to_string(action_id) + " does not match the pending selection");
    PendingSelection next = *pending;
    next.chosen.emplace_back(a.parameter, a.value);
    next.remaining.erase(next.remaining.begin());
    if (next.remaining.empty()) return Invocation{{next.pass}, std::move(next.chosen)};
    return next;
  }

  if (pending)
    throw IllegalAction("pass action " + std::to_string(action_id) + " while '" + pending->pass +
                        "' has pending parameters");
  switch (a.kind) {
    case ActionSpec::Kind::pass_sequence:
      return Invocation{a.passes, {}};
    case ActionSpec::Kind::single_pass:
      if (a.level == Level::L && !a.parameters.empty()) return PendingSelection{a.pass(), {}, a.parameters};
      return Invocation{{a.pass()}, {}};
    default:
      break;
  }
  throw IllegalAction("unreachable action kind");
}

}  // namespace qpass
