#include "qpass/worker.hpp"

#include <csignal>
#include <future>
#include <iostream>
#include <thread>
#include <unordered_map>

#include "qpass/errors.hpp"
#include "qpass/protocol.hpp"

namespace qpass {

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_stop_signal(int) { g_stop.store(true); }

enum class SessionEnd { shutdown, stopped, lost };

struct Session {
  Connection& conn;
  Backend& backend;
  const WorkerOptions& options;
  const std::atomic<bool>& stop;
  std::unordered_map<IrId, std::string>& bodies;
  std::string id;
  int completed = 0;

  std::chrono::steady_clock::time_point last_sent = std::chrono::steady_clock::now();

  void send(const Message& m) {
    conn.send(m);
    last_sent = std::chrono::steady_clock::now();
  }

  void heartbeat_if_due() {
    if (std::chrono::steady_clock::now() - last_sent >= options.heartbeat) {
      Message hb;
      hb.kind = Message::Kind::heartbeat;
      send(hb);
    }
  }

  // Runs the task on a helper thread so heartbeats and stop requests are
  // served while it executes.
  void run(Task task) {
    TaskResult result;
    if (task.kind == Task::Kind::transition) {
      if (task.ir_body.empty()) {
        auto it = bodies.find(task.ir);
        if (it == bodies.end()) {
          result.task_id = task.id;
          result.status = TaskResult::Status::retryable;
          result.error = "worker does not hold IR " + task.ir.hex();
          send(result_message(result));
          return;
        }
        task.ir_body = it->second;
      } else {
        bodies.emplace(task.ir, task.ir_body);
      }
    }
    auto fut = std::async(std::launch::async, [this, task] { return execute_task(backend, task, id); });
    while (fut.wait_for(std::chrono::milliseconds(100)) != std::future_status::ready) {
      if (stop.load()) {
        TaskResult abandon;
        abandon.task_id = task.id;
        abandon.status = TaskResult::Status::retryable;
        abandon.worker_id = id;
        abandon.error = "worker stopped mid-task";
        send(result_message(abandon));
        // The task thread cannot be cancelled; leave without joining it.
        std::cerr << "worker " << id << ": returned task " << task.id << " and stopping\n";
        std::_Exit(0);
      }
      heartbeat_if_due();
    }
    result = fut.get();
    if (result.status == TaskResult::Status::ok && !result.result_body.empty())
      bodies.emplace(ir_id(result.result_body), result.result_body);
    send(result_message(result));
    ++completed;
  }

  SessionEnd loop() {
    send(hello_message(options.worker_id));
    auto ack = conn.receive(std::chrono::milliseconds(30000));
    if (!ack) throw Error("manager did not answer hello");
    if (ack->kind == Message::Kind::error) throw ConfigError("manager refused: " + ack->get("message").value_or(""));
    if (ack->kind != Message::Kind::hello) throw ProtocolError("expected hello reply");
    id = ack->get("worker").value_or(options.worker_id);
    while (!stop.load()) {
      Message req;
      req.kind = Message::Kind::task_request;
      send(req);
      std::optional<Message> reply;
      while (!reply) {
        reply = conn.receive(std::chrono::milliseconds(200));
        if (stop.load() && !reply) return SessionEnd::stopped;
      }
      if (reply->kind == Message::Kind::shutdown) return SessionEnd::shutdown;
      if (reply->kind == Message::Kind::error) {
        std::cerr << "worker " << id << ": manager error: " << reply->get("message").value_or("") << "\n";
        continue;
      }
      if (reply->kind != Message::Kind::task) throw ProtocolError("unexpected reply to task_request");
      if (reply->get("none")) {
        heartbeat_if_due();
        continue;
      }
      run(task_from_message(*reply));
    }
    return SessionEnd::stopped;
  }
};

}  // namespace

const std::atomic<bool>& install_stop_signals() {
  std::signal(SIGTERM, on_stop_signal);
  std::signal(SIGINT, on_stop_signal);
  return g_stop;
}

int worker_loop(const Endpoint& manager, Backend& backend, const WorkerOptions& options,
                const std::atomic<bool>& stop) {
  std::unordered_map<IrId, std::string> bodies;
  int completed = 0;
  int failures = 0;
  bool had_session = false;
  auto backoff = options.backoff_initial;
  while (!stop.load()) {
    Connection conn;
    try {
      conn = Connection::connect(manager);
    } catch (const Error&) {
      ++failures;
      if (options.max_connect_attempts > 0 && failures >= options.max_connect_attempts) break;
      if (had_session && options.exit_on_disconnect) break;
      std::this_thread::sleep_for(backoff);
      backoff = std::min(backoff * 2, options.backoff_max);
      continue;
    }
    failures = 0;
    backoff = options.backoff_initial;
    had_session = true;
    // A fresh connection is a fresh registration: the manager forgets which bodies we hold.
    bodies.clear();
    Session session{conn, backend, options, stop, bodies, options.worker_id};
    try {
      const auto end = session.loop();
      completed += session.completed;
      if (end == SessionEnd::shutdown || end == SessionEnd::stopped) break;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      completed += session.completed;
      std::cerr << "worker " << options.worker_id << ": connection lost: " << e.what() << "\n";
      if (options.exit_on_disconnect) break;
      std::this_thread::sleep_for(backoff);
      backoff = std::min(backoff * 2, options.backoff_max);
    }
  }
  return completed;
}

}  // namespace qpass
