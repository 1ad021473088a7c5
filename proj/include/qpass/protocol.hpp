#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qpass/task.hpp"

namespace qpass {

inline constexpr int kProtocolVersion = 1;

/// Manager/worker message. On the wire each message is one frame
/// (4-byte big-endian length, then the payload); the payload is UTF-8
/// `key=value` lines, `kind` and `version` first, values percent-escaped
/// for '%', '\n' and '\r'.
struct Message {
  enum class Kind { hello, task_request, task, result, heartbeat, shutdown, error };

  Kind kind = Kind::heartbeat;
  int version = kProtocolVersion;
  std::vector<std::pair<std::string, std::string>> fields;

  Message& set(std::string key, std::string value);
  std::optional<std::string> get(std::string_view key) const;
  /// Throws ProtocolError naming the missing key.
  const std::string& require(std::string_view key) const;

  friend bool operator==(const Message&, const Message&) = default;
};

std::string_view to_string(Message::Kind kind);

std::string encode_payload(const Message& m);
/// Throws ProtocolError on unknown kinds or malformed lines.
Message decode_payload(std::string_view payload);

std::string encode_frame(const Message& m);
/// Decodes one complete frame; throws ProtocolError on a length mismatch.
Message decode_frame(std::string_view frame);

Message hello_message(const std::string& worker_id);
Message error_message(const std::string& what);

/// `include_body` false sends only the IR id (the worker holds the body).
Message task_message(const Task& task, bool include_body);
Task task_from_message(const Message& m);

Message result_message(const TaskResult& result);
TaskResult result_from_message(const Message& m);

}  // namespace qpass
