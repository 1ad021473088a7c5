#include "qpass/task.hpp"

#include "qpass/environment.hpp"
#include "qpass/errors.hpp"

namespace qpass {

std::string_view to_string(TaskResult::Status status) {
  switch (status) {
    case TaskResult::Status::ok: return "ok";
    case TaskResult::Status::fault: return "fault";
    case TaskResult::Status::retryable: return "retryable";
  }
  return "fault";
}

TaskResult::Status parse_status(std::string_view text) {
  if (text == "ok") return TaskResult::Status::ok;
  if (text == "fault") return TaskResult::Status::fault;
  if (text == "retryable") return TaskResult::Status::retryable;
  throw ProtocolError("unknown task status '" + std::string(text) + "'");
}

TaskResult execute_task(Backend& backend, const Task& task, const std::string& worker_id) {
  TaskResult r;
  r.task_id = task.id;
  r.worker_id = worker_id;
  try {
    if (task.kind == Task::Kind::baseline) {
      r.base_body = backend.lower_source(task.source);
      r.base_runtime = measure_runtime(backend, r.base_body, task.program_id, task.policy).median_seconds;
      r.o3_body = backend.optimize_o3(r.base_body);
      r.o3_runtime = measure_runtime(backend, r.o3_body, task.program_id, task.policy).median_seconds;
    } else {
      const auto out = execute_invocation(backend, task.policy, task.ir_body, task.invocation, task.program_id);
      r.result_body = out.body;
      r.runtime = out.runtime;
    }
  } catch (const EnvironmentFault& e) {
    r.status = TaskResult::Status::fault;
    r.error = e.what();
    if (!e.stderr_text().empty()) r.error += "\n" + e.stderr_text();
  } catch (const std::exception& e) {
    r.status = TaskResult::Status::fault;
    r.error = e.what();
  }
  return r;
}

}  // namespace qpass
