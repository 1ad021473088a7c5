#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "qpass/task.hpp"

namespace qpass {

/// Pull-based dispatch. Idle workers pull; a departing worker's in-flight
/// tasks go back to the front of the queue. A task pulled more than
/// 1 + retry_budget times without a result is failed.
class TaskQueue {
 public:
  explicit TaskQueue(int retry_budget = 2) : retry_budget_(retry_budget) {}

  void submit(Task task);
  /// Blocks up to `wait` for a task; nullopt on timeout or after close().
  std::optional<Task> pull(const std::string& worker_id, std::chrono::milliseconds wait);
  /// Accepts a worker's result. Retryable results are requeued while the
  /// retry budget lasts; everything else is forwarded to the result stream.
  void complete(TaskResult result);
  void worker_departed(const std::string& worker_id);

  std::vector<TaskResult> drain_results();
  /// Waits until at least one result is available or `wait` elapses.
  std::vector<TaskResult> wait_results(std::chrono::milliseconds wait);

  std::size_t pending() const;
  std::size_t in_flight() const;
  /// Pending + in flight + undrained results.
  std::size_t outstanding() const;

  void close();
  bool closed() const;

 private:
  void fail_locked(const Task& task, const std::string& why);

  int retry_budget_;
  mutable std::mutex mu_;
  std::condition_variable task_cv_;
  std::condition_variable result_cv_;
  std::deque<Task> pending_;
  std::map<std::uint64_t, std::pair<std::string, Task>> in_flight_;
  std::vector<TaskResult> results_;
  bool closed_ = false;
};

}  // namespace qpass
