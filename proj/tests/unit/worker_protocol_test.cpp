#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "qpass/errors.hpp"
#include "qpass/manager_server.hpp"
#include "qpass/protocol.hpp"
#include "qpass/synthetic_backend.hpp"
#include "qpass/task_queue.hpp"
#include "qpass/worker.hpp"

using namespace qpass;
using namespace std::chrono_literals;

namespace {

std::string random_text(std::mt19937_64& rng) {
  static const std::string alphabet = "ab=%\n\r\t ;,{}\"\\\x01\xc3\xa9";
  std::string s(rng() % 40, ' ');
  for (auto& c : s) c = alphabet[rng() % alphabet.size()];
  return s;
}

Task transition_task(std::uint64_t id) {
  Task t;
  t.id = id;
  t.kind = Task::Kind::transition;
  t.program_id = "p";
  t.state = sha256("s" + std::to_string(id));
  t.action = static_cast<int>(id % 7);
  t.ir_body = "1,2,3,4";
  t.ir = ir_id(t.ir_body);
  t.invocation = {{"syn" + std::to_string(id % 5)}, {{"flag", "x=1"}}};
  return t;
}

}  // namespace

TEST(Protocol, RoundTripEveryKind) {
  std::mt19937_64 rng(42);
  const Message::Kind kinds[] = {Message::Kind::hello,     Message::Kind::task_request, Message::Kind::task,
                                 Message::Kind::result,    Message::Kind::heartbeat,    Message::Kind::shutdown,
                                 Message::Kind::error};
  for (int trial = 0; trial < 200; ++trial)
    for (auto kind : kinds) {
      Message m;
      m.kind = kind;
      const int n = static_cast<int>(rng() % 5);
      for (int i = 0; i < n; ++i) m.set("k" + std::to_string(i), random_text(rng));
      EXPECT_EQ(decode_frame(encode_frame(m)), m);
    }
}

TEST(Protocol, RejectsUnknownKindAndBadFrames) {
  EXPECT_THROW(decode_payload("kind=gossip\nversion=1\n"), ProtocolError);
  EXPECT_THROW(decode_payload("version=1\nkind=hello\n"), ProtocolError);
  EXPECT_THROW(decode_payload("kind=hello\nversion=1\nnoequals\n"), ProtocolError);
  EXPECT_THROW(decode_payload("kind=hello\nversion=1\nk=%4\n"), ProtocolError);
  std::string frame = encode_frame(hello_message("w"));
  frame.pop_back();
  EXPECT_THROW(decode_frame(frame), ProtocolError);
}

TEST(Protocol, TaskAndResultRoundTrip) {
  const Task t = transition_task(9);
  const Task back = task_from_message(decode_frame(encode_frame(task_message(t, true))));
  EXPECT_EQ(back.id, t.id);
  EXPECT_EQ(back.state, t.state);
  EXPECT_EQ(back.action, t.action);
  EXPECT_EQ(back.ir, t.ir);
  EXPECT_EQ(back.ir_body, t.ir_body);
  EXPECT_EQ(back.invocation, t.invocation);
  EXPECT_EQ(back.policy.describe(), t.policy.describe());
  EXPECT_TRUE(task_from_message(task_message(t, false)).ir_body.empty());

  Task b;
  b.id = 3;
  b.kind = Task::Kind::baseline;
  b.program_id = "x.c";
  b.source = {"x.c", "/data/x.c", "int main(){return 0;}\n"};
  const Task bb = task_from_message(task_message(b, true));
  EXPECT_EQ(bb.kind, Task::Kind::baseline);
  EXPECT_EQ(bb.source.text, b.source.text);

  TaskResult r;
  r.task_id = 9;
  r.status = TaskResult::Status::fault;
  r.error = "opt crashed\nstack trace";
  r.runtime = 0.1 + 0.2;
  r.base_runtime = 1e-300;
  const auto rb = result_from_message(decode_frame(encode_frame(result_message(r))));
  EXPECT_EQ(rb.status, r.status);
  EXPECT_EQ(rb.error, r.error);
  EXPECT_EQ(rb.runtime, r.runtime);
  EXPECT_EQ(rb.base_runtime, r.base_runtime);
}

TEST(TaskQueue, RequeueOnDepartureAndRetryBudget) {
  TaskQueue q(2);
  q.submit(transition_task(1));
  for (int attempt = 0; attempt < 3; ++attempt) {
    auto t = q.pull("w", 0ms);
    ASSERT_TRUE(t) << attempt;
    q.worker_departed("w");
  }
  EXPECT_FALSE(q.pull("w", 0ms));
  const auto results = q.drain_results();
  ASSERT_EQ(results.size(), 1u);
  EXPECT_EQ(results[0].status, TaskResult::Status::fault);
}

TEST(TaskQueue, RetryableResultRequeues) {
  TaskQueue q(2);
  q.submit(transition_task(1));
  auto t = q.pull("a", 0ms);
  TaskResult r;
  r.task_id = t->id;
  r.status = TaskResult::Status::retryable;
  q.complete(r);
  EXPECT_TRUE(q.drain_results().empty());
  auto again = q.pull("b", 0ms);
  ASSERT_TRUE(again);
  EXPECT_EQ(again->attempts, 2);
}

TEST(TaskQueue, NoStarvationWithTwoWorkers) {
  TaskQueue q;
  for (std::uint64_t i = 1; i <= 10; ++i) q.submit(transition_task(i));
  std::atomic<int> done_a{0}, done_b{0};
  auto work = [&](const std::string& id, std::atomic<int>& done) {
    while (auto t = q.pull(id, 50ms)) {
      std::this_thread::sleep_for(5ms);
      TaskResult r;
      r.task_id = t->id;
      q.complete(r);
      ++done;
    }
  };
  std::thread a(work, "a", std::ref(done_a)), b(work, "b", std::ref(done_b));
  a.join();
  b.join();
  EXPECT_GE(done_a.load(), 1);
  EXPECT_GE(done_b.load(), 1);
  EXPECT_EQ(done_a + done_b, 10);
  EXPECT_EQ(q.drain_results().size(), 10u);
}

TEST(TaskQueue, ZeroWorkersKeepsTasksQueued) {
  TaskQueue q;
  q.submit(transition_task(1));
  EXPECT_EQ(q.pending(), 1u);
  EXPECT_TRUE(q.wait_results(10ms).empty());
  EXPECT_EQ(q.outstanding(), 1u);
}

TEST(Endpoint, Parse) {
  EXPECT_EQ(Endpoint::parse("host:12").port, 12);
  EXPECT_EQ(Endpoint::parse("host:12").host, "host");
  EXPECT_THROW(Endpoint::parse("nohost"), ConfigError);
  EXPECT_THROW(Endpoint::parse("h:99999"), ConfigError);
}

TEST(Worker, ExecutesTasksOverTcp) {
  TaskQueue q;
  ManagerServer server(q, {});
  server.start();
  SyntheticBackend backend({});
  std::atomic<bool> stop{false};
  WorkerOptions opts;
  opts.worker_id = "t";
  int completed = 0;
  std::thread w([&] { completed = worker_loop({"127.0.0.1", server.port()}, backend, opts, stop); });

  const std::string body = backend.lower_source({"p", {}, "p"});
  for (std::uint64_t i = 1; i <= 4; ++i) {
    Task t = transition_task(i);
    t.ir_body = body;
    t.ir = ir_id(body);
    q.submit(t);
  }
  std::vector<TaskResult> got;
  const auto deadline = std::chrono::steady_clock::now() + 20s;
  while (got.size() < 4 && std::chrono::steady_clock::now() < deadline)
    for (auto& r : q.wait_results(100ms)) got.push_back(r);
  ASSERT_EQ(got.size(), 4u);
  SyntheticBackend local({});
  for (const auto& r : got) {
    EXPECT_EQ(r.status, TaskResult::Status::ok) << r.error;
    const Task t = transition_task(r.task_id);
    EXPECT_EQ(r.result_body, local.optimize(body, t.invocation));
    EXPECT_DOUBLE_EQ(r.runtime, local.true_runtime(r.result_body));
  }
  EXPECT_EQ(server.registered(), 1);
  server.stop();
  w.join();
  EXPECT_EQ(completed, 4);
}

TEST(Worker, UnreachableManagerRetriesThenGivesUp) {
  SyntheticBackend backend({});
  std::atomic<bool> stop{false};
  WorkerOptions opts;
  opts.backoff_initial = 5ms;
  opts.max_connect_attempts = 3;
  // Bind and release a port so nothing listens on it.
  int port;
  {
    Listener l({"127.0.0.1", 0});
    port = l.port();
  }
  EXPECT_EQ(worker_loop({"127.0.0.1", port}, backend, opts, stop), 0);
}

TEST(Manager, RefusesVersionMismatch) {
  TaskQueue q;
  ManagerServer server(q, {});
  server.start();
  auto c = Connection::connect({"127.0.0.1", server.port()});
  Message hello = hello_message("old");
  hello.version = 0;
  c.send(hello);
  auto reply = c.receive(5s);
  ASSERT_TRUE(reply);
  EXPECT_EQ(reply->kind, Message::Kind::error);
  server.stop();
}

TEST(Manager, DisconnectRequeuesInFlightTask) {
  TaskQueue q;
  ManagerServer server(q, {});
  server.start();
  q.submit(transition_task(1));
  {
    auto c = Connection::connect({"127.0.0.1", server.port()});
    c.send(hello_message("flaky"));
    ASSERT_TRUE(c.receive(5s));
    Message req;
    req.kind = Message::Kind::task_request;
    c.send(req);
    auto task = c.receive(5s);
    ASSERT_TRUE(task);
    EXPECT_EQ(task_from_message(*task).id, 1u);
    EXPECT_EQ(q.in_flight(), 1u);
  }  // connection dropped mid-task
  const auto deadline = std::chrono::steady_clock::now() + 5s;
  while (q.pending() == 0 && std::chrono::steady_clock::now() < deadline) std::this_thread::sleep_for(10ms);
  EXPECT_EQ(q.pending(), 1u);
  EXPECT_EQ(q.in_flight(), 0u);
  server.stop();
}

TEST(Manager, SilentWorkerTimesOut) {
  TaskQueue q;
  ManagerOptions opts;
  opts.heartbeat_timeout = 300ms;
  ManagerServer server(q, opts);
  server.start();
  q.submit(transition_task(1));
  auto c = Connection::connect({"127.0.0.1", server.port()});
  c.send(hello_message("silent"));
  ASSERT_TRUE(c.receive(5s));
  Message req;
  req.kind = Message::Kind::task_request;
  c.send(req);
  ASSERT_TRUE(c.receive(5s));
  const auto deadline = std::chrono::steady_clock::now() + 5s;
  while (q.pending() == 0 && std::chrono::steady_clock::now() < deadline) std::this_thread::sleep_for(20ms);
  EXPECT_EQ(q.pending(), 1u);
  server.stop();
}
