#include "qpass/socket.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <utility>

#include "qpass/errors.hpp"

namespace qpass {

namespace {
constexpr std::uint32_t kMaxFrame = 256u << 20;
}

Endpoint Endpoint::parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 >= text.size())
    throw ConfigError("endpoint '" + text + "' is not host:port");
  Endpoint e;
  e.host = colon == 0 ? "127.0.0.1" : text.substr(0, colon);
  try {
    e.port = std::stoi(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("endpoint '" + text + "' has a bad port");
  }
  if (e.port < 0 || e.port > 65535) throw ConfigError("endpoint '" + text + "' has a bad port");
  return e;
}

Connection::~Connection() {
  if (fd_ >= 0) ::close(fd_);
}

Connection::Connection(Connection&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}

Connection& Connection::operator=(Connection&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
  }
  return *this;
}

Connection Connection::connect(const Endpoint& endpoint) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(endpoint.port);
  if (getaddrinfo(endpoint.host.c_str(), port.c_str(), &hints, &res) != 0)
    throw Error("cannot resolve " + endpoint.str());
  int fd = -1;
  for (addrinfo* p = res; p; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  freeaddrinfo(res);
  if (fd < 0) throw Error("cannot connect to " + endpoint.str());
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return Connection(fd);
}

void Connection::send(const Message& m) {
  const std::string frame = encode_frame(m);
  std::size_t sent = 0;
  while (sent < frame.size()) {
    const ssize_t n = ::send(fd_, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

bool Connection::wait_readable(std::chrono::milliseconds timeout) {
  pollfd p{fd_, POLLIN, 0};
  for (;;) {
    const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc < 0) throw Error(std::string("poll failed: ") + std::strerror(errno));
    return rc > 0;
  }
}

void Connection::read_exact(char* buf, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd_, buf + got, n - got, 0);
    if (r == 0) throw Error("connection closed by peer");
    if (r < 0) {
      if (errno == EINTR) continue;
      throw Error(std::string("recv failed: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(r);
  }
}

std::optional<Message> Connection::receive(std::chrono::milliseconds timeout) {
  if (!wait_readable(timeout)) return std::nullopt;
  char header[4];
  read_exact(header, 4);
  const std::uint32_t n = (static_cast<std::uint32_t>(static_cast<unsigned char>(header[0])) << 24) |
                          (static_cast<std::uint32_t>(static_cast<unsigned char>(header[1])) << 16) |
                          (static_cast<std::uint32_t>(static_cast<unsigned char>(header[2])) << 8) |
                          static_cast<std::uint32_t>(static_cast<unsigned char>(header[3]));
  if (n > kMaxFrame) throw ProtocolError("frame of " + std::to_string(n) + " bytes exceeds limit");
  std::string payload(n, '\0');
  read_exact(payload.data(), n);
  return decode_payload(payload);
}

void Connection::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Listener::Listener(const Endpoint& endpoint) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw Error("cannot create socket");
  int one = 1;
  setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(endpoint.port));
  if (endpoint.host == "0.0.0.0" || endpoint.host == "*") addr.sin_addr.s_addr = INADDR_ANY;
  else if (endpoint.host == "localhost") addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  else if (inet_pton(AF_INET, endpoint.host.c_str(), &addr.sin_addr) != 1)
    throw ConfigError("listen address must be an IPv4 literal: " + endpoint.host);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 64) != 0) {
    const std::string msg = std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    throw Error("cannot listen on " + endpoint.str() + ": " + msg);
  }
  socklen_t len = sizeof addr;
  getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Listener::~Listener() { close(); }

void Listener::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

std::optional<Connection> Listener::accept(std::chrono::milliseconds timeout) {
  if (fd_ < 0) return std::nullopt;
  pollfd p{fd_, POLLIN, 0};
  const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
  if (rc <= 0) return std::nullopt;
  const int cfd = ::accept(fd_, nullptr, nullptr);
  if (cfd < 0) return std::nullopt;
  int one = 1;
  setsockopt(cfd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return Connection(cfd);
}

}  // namespace qpass
