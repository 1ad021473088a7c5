#pragma once

#include <atomic>
#include <chrono>
#include <list>
#include <mutex>
#include <string>
#include <thread>

#include "qpass/socket.hpp"
#include "qpass/task_queue.hpp"

namespace qpass {

struct ManagerOptions {
  Endpoint listen{"127.0.0.1", 0};
  /// A worker silent for this long is treated as departed.
  std::chrono::milliseconds heartbeat_timeout{30000};
  /// How long a task_request waits for work before replying `none`.
  std::chrono::milliseconds poll_wait{1000};
};

/// Serves a TaskQueue to remote workers, one thread per connection.
/// Results are only forwarded into the queue; applying them is the
/// caller's job.
class ManagerServer {
 public:
  ManagerServer(TaskQueue& queue, ManagerOptions options);
  ~ManagerServer();
  ManagerServer(const ManagerServer&) = delete;
  ManagerServer& operator=(const ManagerServer&) = delete;

  void start();
  /// Tells connected workers to shut down and joins every thread.
  void stop();

  int port() const { return listener_.port(); }
  int connected() const { return connected_.load(); }
  /// Number of workers that said hello since start.
  int registered() const { return registered_.load(); }

 private:
  void accept_loop();
  void serve(Connection conn, int serial);

  TaskQueue& queue_;
  ManagerOptions options_;
  Listener listener_;
  std::atomic<bool> running_{false};
  std::atomic<int> connected_{0};
  std::atomic<int> registered_{0};
  std::thread acceptor_;
  std::mutex threads_mu_;
  std::list<std::thread> threads_;
};

}  // namespace qpass
