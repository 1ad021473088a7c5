#include "qpass/manager_server.hpp"

#include <iostream>
#include <unordered_set>

#include "qpass/errors.hpp"
#include "qpass/protocol.hpp"

namespace qpass {

ManagerServer::ManagerServer(TaskQueue& queue, ManagerOptions options)
    : queue_(queue), options_(std::move(options)), listener_(options_.listen) {}

ManagerServer::~ManagerServer() { stop(); }

void ManagerServer::start() {
  if (running_.exchange(true)) return;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void ManagerServer::stop() {
  if (!running_.exchange(false)) return;
  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();
  std::list<std::thread> threads;
  {
    std::lock_guard lock(threads_mu_);
    threads.swap(threads_);
  }
  for (auto& t : threads)
    if (t.joinable()) t.join();
}

void ManagerServer::accept_loop() {
  int serial = 0;
  while (running_.load()) {
    auto conn = listener_.accept(std::chrono::milliseconds(200));
    if (!conn) continue;
    std::lock_guard lock(threads_mu_);
    threads_.emplace_back([this, c = std::move(*conn), s = ++serial]() mutable { serve(std::move(c), s); });
  }
}

void ManagerServer::serve(Connection conn, int serial) {
  ++connected_;
  std::string worker_id;
  // IR ids this worker is known to hold, so bodies can be sent by hash.
  std::unordered_set<IrId> held;
  try {
    auto hello = conn.receive(options_.heartbeat_timeout);
    if (!hello || hello->kind != Message::Kind::hello) {
      conn.send(error_message("expected hello"));
      --connected_;
      return;
    }
    if (hello->version != kProtocolVersion) {
      conn.send(error_message("protocol version " + std::to_string(hello->version) + " refused; manager speaks " +
                              std::to_string(kProtocolVersion)));
      --connected_;
      return;
    }
    worker_id = hello->get("worker").value_or("worker") + "#" + std::to_string(serial);
    Message ack = hello_message(worker_id);
    conn.send(ack);
    ++registered_;

    const auto slice = std::chrono::milliseconds(200);
    auto last_seen = std::chrono::steady_clock::now();
    bool leaving = false;
    while (running_.load() && !leaving) {
      std::optional<Message> m;
      try {
        m = conn.receive(slice);
      } catch (const ProtocolError& e) {
        conn.send(error_message(e.what()));
        continue;
      }
      if (!m) {
        if (std::chrono::steady_clock::now() - last_seen > options_.heartbeat_timeout) {
          std::cerr << "manager: worker " << worker_id << " timed out\n";
          break;
        }
        continue;
      }
      last_seen = std::chrono::steady_clock::now();
      switch (m->kind) {
        case Message::Kind::heartbeat:
          break;
        case Message::Kind::task_request: {
          auto task = queue_.pull(worker_id, options_.poll_wait);
          if (!task) {
            Message none;
            none.kind = Message::Kind::task;
            none.set("none", "1");
            conn.send(none);
            break;
          }
          const bool include_body = task->kind == Task::Kind::transition && !held.contains(task->ir);
          conn.send(task_message(*task, include_body));
          if (task->kind == Task::Kind::transition) held.insert(task->ir);
          break;
        }
        case Message::Kind::result: {
          auto r = result_from_message(*m);
          r.worker_id = worker_id;
          if (r.status == TaskResult::Status::ok && !r.result_body.empty()) held.insert(ir_id(r.result_body));
          queue_.complete(std::move(r));
          break;
        }
        case Message::Kind::shutdown:
          leaving = true;
          break;
        default:
          conn.send(error_message("unexpected " + std::string(to_string(m->kind)) + " message"));
      }
    }
    if (!running_.load()) {
      Message bye;
      bye.kind = Message::Kind::shutdown;
      conn.send(bye);
    }
  } catch (const std::exception& e) {
    if (running_.load()) std::cerr << "manager: connection " << serial << " dropped: " << e.what() << "\n";
  }
  if (!worker_id.empty()) queue_.worker_departed(worker_id);
  --connected_;
}

}  // namespace qpass
