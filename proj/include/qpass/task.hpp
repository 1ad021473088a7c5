#pragma once

#include <cstdint>
#include <string>

#include "qpass/action.hpp"
#include "qpass/backend.hpp"
#include "qpass/ir.hpp"
#include "qpass/state.hpp"

namespace qpass {

/// Unit of work for a worker: either the baseline pair of a program or one
/// state-action transition. Re-executing a task yields an equivalent result.
struct Task {
  enum class Kind { baseline, transition };

  std::uint64_t id = 0;
  Kind kind = Kind::transition;
  std::string program_id;
  BenchmarkPolicy policy;

  // transition
  Fingerprint state;
  int action = -1;
  IrId ir;
  std::string ir_body;  // may be empty on the wire when the worker already holds `ir`
  Invocation invocation;

  // baseline
  ProgramSource source;

  int attempts = 0;  // manager-side bookkeeping, not sent
};

struct TaskResult {
  enum class Status { ok, fault, retryable };

  std::uint64_t task_id = 0;
  Status status = Status::ok;
  std::string worker_id;
  std::string error;  // fault message plus captured stderr

  // transition
  std::string result_body;
  double runtime = 0.0;

  // baseline
  std::string base_body;
  double base_runtime = 0.0;
  std::string o3_body;
  double o3_runtime = 0.0;
};

std::string_view to_string(TaskResult::Status status);
TaskResult::Status parse_status(std::string_view text);

/// Runs a task against `backend`. Backend failures become status=fault
/// results rather than exceptions.
TaskResult execute_task(Backend& backend, const Task& task, const std::string& worker_id);

}  // namespace qpass
