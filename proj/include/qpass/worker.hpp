#pragma once

#include <atomic>
#include <chrono>
#include <string>

#include "qpass/backend.hpp"
#include "qpass/socket.hpp"

namespace qpass {

struct WorkerOptions {
  std::string worker_id = "worker";
  std::chrono::milliseconds heartbeat{10000};
  std::chrono::milliseconds backoff_initial{100};
  std::chrono::milliseconds backoff_max{5000};
  /// Consecutive failed connection attempts before giving up; 0 retries forever.
  int max_connect_attempts = 0;
  /// Leave once the manager has been unreachable after at least one session.
  bool exit_on_disconnect = false;
};

/// Connects to the manager, registers and executes pulled tasks one at a
/// time until the manager sends shutdown or `stop` becomes true. When `stop`
/// is raised mid-task the in-flight task is returned as retryable.
/// Returns the number of tasks completed.
int worker_loop(const Endpoint& manager, Backend& backend, const WorkerOptions& options,
                const std::atomic<bool>& stop);

/// Installs SIGTERM/SIGINT handlers that raise the returned flag.
const std::atomic<bool>& install_stop_signals();

}  // namespace qpass
