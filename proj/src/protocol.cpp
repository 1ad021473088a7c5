#include "qpass/protocol.hpp"

#include <charconv>
#include <cstdio>
#include <json.hpp>

#include "qpass/errors.hpp"

namespace qpass {

namespace {

constexpr std::pair<Message::Kind, std::string_view> kKinds[] = {
    {Message::Kind::hello, "hello"},         {Message::Kind::task_request, "task_request"},
    {Message::Kind::task, "task"},           {Message::Kind::result, "result"},
    {Message::Kind::heartbeat, "heartbeat"}, {Message::Kind::shutdown, "shutdown"},
    {Message::Kind::error, "error"},
};

std::string escape(std::string_view v) {
  std::string out;
  out.reserve(v.size());
  for (char c : v) {
    if (c == '%') out += "%25";
    else if (c == '\n') out += "%0A";
    else if (c == '\r') out += "%0D";
    else out += c;
  }
  return out;
}

std::string unescape(std::string_view v) {
  std::string out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != '%') {
      out += v[i];
      continue;
    }
    if (i + 2 >= v.size()) throw ProtocolError("truncated escape");
    const auto code = v.substr(i + 1, 2);
    if (code == "25") out += '%';
    else if (code == "0A") out += '\n';
    else if (code == "0D") out += '\r';
    else throw ProtocolError("bad escape %" + std::string(code));
    i += 2;
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ProtocolError("bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ProtocolError("bad number '" + s + "'");
  }
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ProtocolError("bad integer '" + s + "'");
  return v;
}

std::string policy_to_text(const BenchmarkPolicy& p) {
  nlohmann::json j;
  j["fallback"] = p.fallback_reps;
  for (const auto& t : p.tiers) j["tiers"].push_back({t.below_seconds, t.repetitions});
  return j.dump();
}

BenchmarkPolicy policy_from_text(const std::string& text) {
  BenchmarkPolicy p;
  const auto j = nlohmann::json::parse(text);
  p.fallback_reps = j.at("fallback").get<int>();
  p.tiers.clear();
  if (j.contains("tiers"))
    for (const auto& t : j["tiers"]) p.tiers.push_back({t.at(0).get<double>(), t.at(1).get<int>()});
  return p;
}

}  // namespace

Message& Message::set(std::string key, std::string value) {
  fields.emplace_back(std::move(key), std::move(value));
  return *this;
}

std::optional<std::string> Message::get(std::string_view key) const {
  for (const auto& [k, v] : fields)
    if (k == key) return v;
  return std::nullopt;
}

const std::string& Message::require(std::string_view key) const {
  for (const auto& [k, v] : fields)
    if (k == key) return v;
  throw ProtocolError(std::string(to_string(kind)) + " message lacks field '" + std::string(key) + "'");
}

std::string_view to_string(Message::Kind kind) {
  for (const auto& [k, name] : kKinds)
    if (k == kind) return name;
  return "unknown";
}

std::string encode_payload(const Message& m) {
  std::string out = "kind=" + std::string(to_string(m.kind)) + "\nversion=" + std::to_string(m.version) + "\n";
  for (const auto& [k, v] : m.fields) {
    if (k.empty() || k.find_first_of("=\n\r") != std::string::npos) throw ProtocolError("bad field name '" + k + "'");
    out += k;
    out += '=';
    out += escape(v);
    out += '\n';
  }
  return out;
}

Message decode_payload(std::string_view payload) {
  Message m;
  bool have_kind = false;
  bool have_version = false;
  std::size_t pos = 0;
  while (pos < payload.size()) {
    const auto nl = payload.find('\n', pos);
    if (nl == std::string_view::npos) throw ProtocolError("unterminated payload line");
    const auto line = payload.substr(pos, nl - pos);
    pos = nl + 1;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) throw ProtocolError("malformed payload line '" + std::string(line) + "'");
    const std::string key(line.substr(0, eq));
    std::string value = unescape(line.substr(eq + 1));
    if (!have_kind) {
      if (key != "kind") throw ProtocolError("payload must start with kind");
      bool found = false;
      for (const auto& [k, name] : kKinds)
        if (name == value) {
          m.kind = k;
          found = true;
        }
      if (!found) throw ProtocolError("unknown message kind '" + value + "'");
      have_kind = true;
    } else if (!have_version) {
      if (key != "version") throw ProtocolError("payload must carry version second");
      m.version = static_cast<int>(parse_u64(value));
      have_version = true;
    } else {
      m.fields.emplace_back(key, std::move(value));
    }
  }
  if (!have_kind || !have_version) throw ProtocolError("payload lacks kind/version");
  return m;
}

std::string encode_frame(const Message& m) {
  const std::string payload = encode_payload(m);
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string frame(4, '\0');
  frame[0] = static_cast<char>(n >> 24);
  frame[1] = static_cast<char>(n >> 16);
  frame[2] = static_cast<char>(n >> 8);
  frame[3] = static_cast<char>(n);
  return frame + payload;
}

Message decode_frame(std::string_view frame) {
  if (frame.size() < 4) throw ProtocolError("frame shorter than its header");
  const std::uint32_t n = (static_cast<std::uint32_t>(static_cast<unsigned char>(frame[0])) << 24) |
                          (static_cast<std::uint32_t>(static_cast<unsigned char>(frame[1])) << 16) |
                          (static_cast<std::uint32_t>(static_cast<unsigned char>(frame[2])) << 8) |
                          static_cast<std::uint32_t>(static_cast<unsigned char>(frame[3]));
  if (frame.size() - 4 != n) throw ProtocolError("frame length mismatch");
  return decode_payload(frame.substr(4));
}

Message hello_message(const std::string& worker_id) {
  Message m;
  m.kind = Message::Kind::hello;
  m.set("worker", worker_id);
  return m;
}

Message error_message(const std::string& what) {
  Message m;
  m.kind = Message::Kind::error;
  m.set("message", what);
  return m;
}

Message task_message(const Task& task, bool include_body) {
  Message m;
  m.kind = Message::Kind::task;
  m.set("id", std::to_string(task.id));
  m.set("type", task.kind == Task::Kind::baseline ? "baseline" : "transition");
  m.set("program", task.program_id);
  m.set("policy", policy_to_text(task.policy));
  if (task.kind == Task::Kind::baseline) {
    m.set("source_path", task.source.path.string());
    m.set("source_text", task.source.text);
  } else {
    m.set("state", task.state.hex());
    m.set("action", std::to_string(task.action));
    m.set("ir", task.ir.hex());
    if (include_body) m.set("ir_body", task.ir_body);
    m.set("passes", nlohmann::json(task.invocation.passes).dump());
    m.set("flags", nlohmann::json(task.invocation.flags).dump());
  }
  return m;
}

Task task_from_message(const Message& m) {
  if (m.kind != Message::Kind::task) throw ProtocolError("expected a task message");
  Task t;
  t.id = parse_u64(m.require("id"));
  const auto& type = m.require("type");
  t.program_id = m.require("program");
  try {
    t.policy = policy_from_text(m.require("policy"));
    if (type == "baseline") {
      t.kind = Task::Kind::baseline;
      t.source.id = t.program_id;
      t.source.path = m.require("source_path");
      t.source.text = m.require("source_text");
    } else if (type == "transition") {
      t.kind = Task::Kind::transition;
      t.state = Digest::from_hex(m.require("state"));
      t.action = static_cast<int>(parse_u64(m.require("action")));
      t.ir = Digest::from_hex(m.require("ir"));
      t.ir_body = m.get("ir_body").value_or("");
      t.invocation.passes = nlohmann::json::parse(m.require("passes")).get<std::vector<std::string>>();
      t.invocation.flags = nlohmann::json::parse(m.require("flags")).get<std::vector<FlagAssignment>>();
    } else {
      throw ProtocolError("unknown task type '" + type + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed task field: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ProtocolError(std::string("malformed task field: ") + e.what());
  }
  return t;
}

Message result_message(const TaskResult& r) {
  Message m;
  m.kind = Message::Kind::result;
  m.set("id", std::to_string(r.task_id));
  m.set("status", std::string(to_string(r.status)));
  m.set("worker", r.worker_id);
  m.set("error", r.error);
  m.set("body", r.result_body);
  m.set("runtime", fmt_double(r.runtime));
  m.set("base_body", r.base_body);
  m.set("base_runtime", fmt_double(r.base_runtime));
  m.set("o3_body", r.o3_body);
  m.set("o3_runtime", fmt_double(r.o3_runtime));
  return m;
}

TaskResult result_from_message(const Message& m) {
  if (m.kind != Message::Kind::result) throw ProtocolError("expected a result message");
  TaskResult r;
  r.task_id = parse_u64(m.require("id"));
  r.status = parse_status(m.require("status"));
  r.worker_id = m.require("worker");
  r.error = m.require("error");
  r.result_body = m.require("body");
  r.runtime = parse_double(m.require("runtime"));
  r.base_body = m.require("base_body");
  r.base_runtime = parse_double(m.require("base_runtime"));
  r.o3_body = m.require("o3_body");
  r.o3_runtime = parse_double(m.require("o3_runtime"));
  return r;
}

}  // namespace qpass
