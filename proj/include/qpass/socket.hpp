#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "qpass/protocol.hpp"

namespace qpass {

struct Endpoint {
  std::string host = "127.0.0.1";
  int port = 0;

  /// Parses `host:port`; throws ConfigError.
  static Endpoint parse(const std::string& text);
  std::string str() const { return host + ":" + std::to_string(port); }
};

/// Owned stream socket carrying length-prefixed message frames.
class Connection {
 public:
  Connection() = default;
  explicit Connection(int fd) : fd_(fd) {}
  ~Connection();
  Connection(Connection&& other) noexcept;
  Connection& operator=(Connection&& other) noexcept;
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  /// Throws Error when the endpoint is unreachable.
  static Connection connect(const Endpoint& endpoint);

  bool valid() const { return fd_ >= 0; }
  void send(const Message& m);
  /// nullopt on timeout; throws Error when the peer closed the stream.
  std::optional<Message> receive(std::chrono::milliseconds timeout);
  void shutdown();

 private:
  bool wait_readable(std::chrono::milliseconds timeout);
  void read_exact(char* buf, std::size_t n);

  int fd_ = -1;
};

class Listener {
 public:
  explicit Listener(const Endpoint& endpoint);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  /// The bound port (useful when binding port 0).
  int port() const { return port_; }
  std::optional<Connection> accept(std::chrono::milliseconds timeout);
  void close();

 private:
  int fd_ = -1;
  int port_ = 0;
};

}  // namespace qpass
