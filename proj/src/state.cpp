#include "qpass/state.hpp"

#include <chrono>
#include <json.hpp>

#include "qpass/errors.hpp"

namespace qpass {

std::string_view to_string(Level level) {
  switch (level) {
    case Level::H: return "H";
    case Level::M: return "M";
    case Level::L: return "L";
  }
  return "?";
}

Level parse_level(std::string_view text) {
  if (text == "H" || text == "h") return Level::H;
  if (text == "M" || text == "m") return Level::M;
  if (text == "L" || text == "l") return Level::L;
  throw ConfigError("unknown action level '" + std::string(text) + "' (expected H, M or L)");
}

std::string Invocation::canonical() const {
  std::string out;
  for (std::size_t i = 0; i < passes.size(); ++i) {
    if (i) out += ' ';
    out += passes[i];
  }
  if (!flags.empty()) {
    out += '{';
    for (std::size_t i = 0; i < flags.size(); ++i) {
      if (i) out += ',';
      out += flags[i].first + "=" + flags[i].second;
    }
    out += '}';
  }
  return out;
}

ActionHistory append_action(const ActionHistory& history, const ActionSpec& action, int mu_max) {
  ActionHistory next = history;
  if (action.is_pass_level()) {
    if (history.pending)
      throw IllegalAction("pass action " + std::to_string(action.id) + " while parameters of '" +
                          history.pending->pass + "' are pending");
    if (history.pass_count >= mu_max)
      throw BudgetExhausted("action budget of " + std::to_string(mu_max) + " pass-level actions exhausted");
    next.entries.push_back(action.id);
    ++next.pass_count;
    if (action.level == Level::L && action.kind == ActionSpec::Kind::single_pass && !action.parameters.empty())
      next.pending = PendingSelection{action.pass(), {}, action.parameters};
    return next;
  }

  if (!history.pending || history.pending->pass != action.pass() ||
      history.pending->remaining.front() != action.parameter)
    throw IllegalAction("parameter action " + std::to_string(action.id) + " (" + action.pass() + ":" +
                        action.parameter + ") does not match the pending selection");
  next.entries.push_back(action.id);
  next.pending->chosen.emplace_back(action.parameter, action.value);
  next.pending->remaining.erase(next.pending->remaining.begin());
  if (next.pending->remaining.empty()) next.pending.reset();
  return next;
}

AgentState AgentState::base(const IrId& ir, std::string program_id) {
  return AgentState{ir, {}, std::move(program_id)};
}

Fingerprint fingerprint(const AgentState& state) {
  Sha256Builder h;
  h.update("state/v1");
  h.update(std::string_view(reinterpret_cast<const char*>(state.ir.bytes.data()), state.ir.bytes.size()));
  h.update_u64(state.history.entries.size());
  for (int e : state.history.entries) h.update_u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(e)));
  if (const auto& p = state.history.pending) {
    h.update_u64(1).update(p->pass).update_u64(p->chosen.size());
    for (const auto& [k, v] : p->chosen) h.update(k).update("=").update(v).update(";");
    h.update_u64(p->remaining.size());
    for (const auto& r : p->remaining) h.update(r).update(";");
  } else {
    h.update_u64(0);
  }
  return h.finish();
}

std::string serialize_state(const AgentState& state) {
  nlohmann::json j;
  j["ir"] = state.ir.hex();
  j["program"] = state.program_id;
  j["entries"] = state.history.entries;
  j["pass_count"] = state.history.pass_count;
  if (const auto& p = state.history.pending) {
    nlohmann::json pj;
    pj["pass"] = p->pass;
    pj["chosen"] = p->chosen;
    pj["remaining"] = p->remaining;
    j["pending"] = pj;
  }
  return j.dump();
}

AgentState deserialize_state(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  AgentState s;
  s.ir = Digest::from_hex(j.at("ir").get<std::string>());
  s.program_id = j.at("program").get<std::string>();
  s.history.entries = j.at("entries").get<std::vector<int>>();
  s.history.pass_count = j.at("pass_count").get<int>();
  if (j.contains("pending")) {
    const auto& pj = j["pending"];
    s.history.pending = PendingSelection{pj.at("pass").get<std::string>(),
                                         pj.at("chosen").get<std::vector<FlagAssignment>>(),
                                         pj.at("remaining").get<std::vector<std::string>>()};
  }
  return s;
}

std::int64_t now_millis() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace qpass
