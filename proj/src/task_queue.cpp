#include "qpass/task_queue.hpp"

namespace qpass {

void TaskQueue::submit(Task task) {
  {
    std::lock_guard lock(mu_);
    pending_.push_back(std::move(task));
  }
  task_cv_.notify_one();
}

std::optional<Task> TaskQueue::pull(const std::string& worker_id, std::chrono::milliseconds wait) {
  std::unique_lock lock(mu_);
  task_cv_.wait_for(lock, wait, [&] { return closed_ || !pending_.empty(); });
  while (!closed_ && !pending_.empty()) {
    Task t = std::move(pending_.front());
    pending_.pop_front();
    ++t.attempts;
    if (t.attempts > 1 + retry_budget_) {
      fail_locked(t, "retry budget exhausted");
      continue;
    }
    in_flight_[t.id] = {worker_id, t};
    return t;
  }
  return std::nullopt;
}

void TaskQueue::fail_locked(const Task& task, const std::string& why) {
  TaskResult r;
  r.task_id = task.id;
  r.status = TaskResult::Status::fault;
  r.error = why;
  results_.push_back(std::move(r));
  result_cv_.notify_all();
}

void TaskQueue::complete(TaskResult result) {
  std::lock_guard lock(mu_);
  auto it = in_flight_.find(result.task_id);
  if (result.status == TaskResult::Status::retryable) {
    if (it != in_flight_.end()) {
      Task t = std::move(it->second.second);
      in_flight_.erase(it);
      if (t.attempts > retry_budget_) {
        fail_locked(t, "retry budget exhausted: " + result.error);
      } else {
        pending_.push_front(std::move(t));
        task_cv_.notify_one();
      }
    }
    return;
  }
  if (it != in_flight_.end()) {
    in_flight_.erase(it);
  } else {
    // A requeued copy may still be pending; the first result settles it.
    for (auto p = pending_.begin(); p != pending_.end(); ++p)
      if (p->id == result.task_id) {
        pending_.erase(p);
        break;
      }
  }
  results_.push_back(std::move(result));
  result_cv_.notify_all();
}

void TaskQueue::worker_departed(const std::string& worker_id) {
  std::lock_guard lock(mu_);
  for (auto it = in_flight_.begin(); it != in_flight_.end();) {
    if (it->second.first == worker_id) {
      Task t = std::move(it->second.second);
      it = in_flight_.erase(it);
      if (t.attempts > retry_budget_) fail_locked(t, "worker " + worker_id + " departed; retry budget exhausted");
      else pending_.push_front(std::move(t));
    } else {
      ++it;
    }
  }
  task_cv_.notify_all();
}

std::vector<TaskResult> TaskQueue::drain_results() {
  std::lock_guard lock(mu_);
  return std::exchange(results_, {});
}

std::vector<TaskResult> TaskQueue::wait_results(std::chrono::milliseconds wait) {
  std::unique_lock lock(mu_);
  result_cv_.wait_for(lock, wait, [&] { return !results_.empty(); });
  return std::exchange(results_, {});
}

std::size_t TaskQueue::pending() const {
  std::lock_guard lock(mu_);
  return pending_.size();
}

std::size_t TaskQueue::in_flight() const {
  std::lock_guard lock(mu_);
  return in_flight_.size();
}

std::size_t TaskQueue::outstanding() const {
  std::lock_guard lock(mu_);
  return pending_.size() + in_flight_.size() + results_.size();
}

void TaskQueue::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  task_cv_.notify_all();
  result_cv_.notify_all();
}

bool TaskQueue::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

}  // namespace qpass
