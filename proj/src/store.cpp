#include "qpass/store.hpp"

#include <sqlite3.h>

#include <fstream>
#include <sstream>

#include "qpass/errors.hpp"

namespace qpass {

namespace {

class Stmt {
 public:
  Stmt(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &st_, nullptr) != SQLITE_OK)
      throw Error(std::string("sqlite prepare: ") + sqlite3_errmsg(db) + " in: " + sql);
  }
  ~Stmt() { sqlite3_finalize(st_); }
  Stmt(const Stmt&) = delete;
  Stmt& operator=(const Stmt&) = delete;

  Stmt& bind(int i, const std::string& v) {
    sqlite3_bind_text(st_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
    return *this;
  }
  Stmt& bind(int i, double v) {
    sqlite3_bind_double(st_, i, v);
    return *this;
  }
  Stmt& bind(int i, std::int64_t v) {
    sqlite3_bind_int64(st_, i, v);
    return *this;
  }
  Stmt& bind(int i, int v) { return bind(i, static_cast<std::int64_t>(v)); }

  bool step() {
    const int rc = sqlite3_step(st_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw Error(std::string("sqlite step: ") + sqlite3_errmsg(db_));
  }

  std::string text(int col) const {
    const auto* p = sqlite3_column_text(st_, col);
    return p ? std::string(reinterpret_cast<const char*>(p), sqlite3_column_bytes(st_, col)) : std::string{};
  }
  double real(int col) const { return sqlite3_column_double(st_, col); }
  std::int64_t integer(int col) const { return sqlite3_column_int64(st_, col); }

 private:
  sqlite3* db_;
  sqlite3_stmt* st_ = nullptr;
};

TransitionRecord read_transition(const Stmt& s) {
  TransitionRecord r;
  r.key.state = Digest::from_hex(s.text(0));
  r.key.action = static_cast<int>(s.integer(1));
  r.result_ir = Digest::from_hex(s.text(2));
  r.reward = s.real(3);
  r.runtime_after = s.real(4);
  r.measured_at = s.integer(5);
  return r;
}

Baseline read_baseline(const Stmt& s) {
  return Baseline{s.text(0), Digest::from_hex(s.text(1)), s.real(2), Digest::from_hex(s.text(3)), s.real(4)};
}

std::string origin_name(IrOrigin::Kind k) {
  switch (k) {
    case IrOrigin::Kind::base: return "base";
    case IrOrigin::Kind::optimized: return "optimized";
    case IrOrigin::Kind::o3_baseline: return "o3_baseline";
  }
  return "base";
}

}  // namespace

Store::Store(std::filesystem::path root) : root_(std::move(root)) {
  std::string db_path = ":memory:";
  if (!root_.empty()) {
    std::filesystem::create_directories(root_ / "ir");
    db_path = (root_ / "store.db").string();
  }
  if (sqlite3_open(db_path.c_str(), &db_) != SQLITE_OK) {
    const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    throw Error("cannot open store " + db_path + ": " + msg);
  }
  exec("PRAGMA journal_mode=WAL");
  exec("PRAGMA synchronous=NORMAL");
  exec("PRAGMA busy_timeout=5000");
  exec(R"sql(
    CREATE TABLE IF NOT EXISTS ir_artifacts(id TEXT PRIMARY KEY, origin TEXT NOT NULL, parent TEXT, action INTEGER);
    CREATE TABLE IF NOT EXISTS ir_bodies(id TEXT PRIMARY KEY, body TEXT NOT NULL);
    CREATE TABLE IF NOT EXISTS states(fp TEXT PRIMARY KEY, body TEXT NOT NULL);
    CREATE TABLE IF NOT EXISTS transitions(state TEXT NOT NULL, action INTEGER NOT NULL, result_ir TEXT NOT NULL,
      reward REAL NOT NULL, runtime_after REAL NOT NULL, measured_at INTEGER NOT NULL, PRIMARY KEY(state, action));
    CREATE TABLE IF NOT EXISTS runtimes(ir TEXT PRIMARY KEY, seconds REAL NOT NULL, policy TEXT, measured_at INTEGER);
    CREATE TABLE IF NOT EXISTS baselines(program TEXT PRIMARY KEY, base_ir TEXT NOT NULL, base_runtime REAL NOT NULL,
      o3_ir TEXT NOT NULL, o3_runtime REAL NOT NULL);
    CREATE TABLE IF NOT EXISTS faults(key TEXT NOT NULL, message TEXT, at INTEGER);
    CREATE TABLE IF NOT EXISTS runs(run_id TEXT PRIMARY KEY, config TEXT NOT NULL, step INTEGER NOT NULL);
  )sql");
}

Store::~Store() { sqlite3_close(db_); }

void Store::exec(const char* sql) const {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown";
    sqlite3_free(err);
    throw Error("sqlite: " + msg);
  }
}

std::filesystem::path Store::ir_path(const IrId& id) const { return root_ / "ir" / (id.hex() + ".ll"); }

IrId Store::put_ir(const IrArtifact& artifact) {
  std::lock_guard lock(mu_);
  const IrId id = artifact.id;
  if (ir_cache_.count(id)) return id;
  {
    Stmt q(db_, "SELECT 1 FROM ir_artifacts WHERE id=?");
    if (q.bind(1, id.hex()).step()) {
      ir_cache_.emplace(id, artifact.body);
      return id;
    }
  }
  if (root_.empty()) {
    Stmt b(db_, "INSERT OR IGNORE INTO ir_bodies(id, body) VALUES(?,?)");
    b.bind(1, id.hex()).bind(2, artifact.body).step();
  } else {
    const auto path = ir_path(id);
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << artifact.body;
      if (!out) throw Error("cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
  }
  Stmt ins(db_, "INSERT OR IGNORE INTO ir_artifacts(id, origin, parent, action) VALUES(?,?,?,?)");
  ins.bind(1, id.hex()).bind(2, origin_name(artifact.origin.kind));
  ins.bind(3, artifact.origin.parent ? artifact.origin.parent->hex() : std::string{});
  ins.bind(4, artifact.origin.action);
  ins.step();
  ir_cache_.emplace(id, artifact.body);
  return id;
}

std::string Store::get_ir(const IrId& id) const {
  std::lock_guard lock(mu_);
  if (auto it = ir_cache_.find(id); it != ir_cache_.end()) return it->second;
  std::string body;
  if (root_.empty()) {
    Stmt q(db_, "SELECT body FROM ir_bodies WHERE id=?");
    if (!q.bind(1, id.hex()).step()) throw Error("IR " + id.hex() + " not in store");
    body = q.text(0);
  } else {
    std::ifstream in(ir_path(id), std::ios::binary);
    if (!in) throw Error("IR " + id.hex() + " not in store");
    std::ostringstream ss;
    ss << in.rdbuf();
    body = ss.str();
  }
  if (ir_id(body) != id) throw IntegrityError("IR " + id.hex() + " failed integrity check: body rehashes differently");
  ir_cache_.emplace(id, body);
  return body;
}

bool Store::has_ir(const IrId& id) const {
  std::lock_guard lock(mu_);
  if (ir_cache_.count(id)) return true;
  Stmt q(db_, "SELECT 1 FROM ir_artifacts WHERE id=?");
  return q.bind(1, id.hex()).step();
}

std::size_t Store::ir_count() const {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT COUNT(*) FROM ir_artifacts");
  q.step();
  return static_cast<std::size_t>(q.integer(0));
}

void Store::upsert_transition(const TransitionRecord& record) {
  if (!has_ir(record.result_ir))
    throw IntegrityError("transition " + record.key.state.hex() + "/" + std::to_string(record.key.action) +
                         " references missing IR " + record.result_ir.hex());
  std::lock_guard lock(mu_);
  Stmt q(db_,
         "INSERT INTO transitions(state, action, result_ir, reward, runtime_after, measured_at) VALUES(?,?,?,?,?,?) "
         "ON CONFLICT(state, action) DO UPDATE SET result_ir=excluded.result_ir, reward=excluded.reward, "
         "runtime_after=excluded.runtime_after, measured_at=excluded.measured_at");
  q.bind(1, record.key.state.hex()).bind(2, record.key.action).bind(3, record.result_ir.hex());
  q.bind(4, record.reward).bind(5, record.runtime_after).bind(6, record.measured_at);
  q.step();
}

std::optional<TransitionRecord> Store::lookup(const TransitionKey& key) const {
  std::lock_guard lock(mu_);
  Stmt q(db_,
         "SELECT state, action, result_ir, reward, runtime_after, measured_at FROM transitions "
         "WHERE state=? AND action=?");
  q.bind(1, key.state.hex()).bind(2, key.action);
  if (!q.step()) return std::nullopt;
  return read_transition(q);
}

std::vector<TransitionRecord> Store::transitions() const {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT state, action, result_ir, reward, runtime_after, measured_at FROM transitions ORDER BY rowid");
  std::vector<TransitionRecord> out;
  while (q.step()) out.push_back(read_transition(q));
  return out;
}

std::size_t Store::transition_count() const {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT COUNT(*) FROM transitions");
  q.step();
  return static_cast<std::size_t>(q.integer(0));
}

void Store::put_state(const AgentState& state) {
  const std::string fp = fingerprint(state).hex();
  const std::string body = serialize_state(state);
  std::lock_guard lock(mu_);
  Stmt q(db_, "INSERT OR IGNORE INTO states(fp, body) VALUES(?,?)");
  q.bind(1, fp).bind(2, body).step();
}

std::optional<AgentState> Store::get_state(const Fingerprint& fp) const {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT body FROM states WHERE fp=?");
  if (!q.bind(1, fp.hex()).step()) return std::nullopt;
  return deserialize_state(q.text(0));
}

void Store::put_runtime(const IrId& ir, double seconds, const std::string& policy) {
  std::lock_guard lock(mu_);
  Stmt q(db_, "INSERT OR REPLACE INTO runtimes(ir, seconds, policy, measured_at) VALUES(?,?,?,?)");
  q.bind(1, ir.hex()).bind(2, seconds).bind(3, policy).bind(4, now_millis()).step();
}

std::optional<double> Store::runtime(const IrId& ir) const {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT seconds FROM runtimes WHERE ir=?");
  if (!q.bind(1, ir.hex()).step()) return std::nullopt;
  return q.real(0);
}

void Store::put_baseline(const Baseline& b) {
  std::lock_guard lock(mu_);
  Stmt q(db_, "INSERT OR REPLACE INTO baselines(program, base_ir, base_runtime, o3_ir, o3_runtime) VALUES(?,?,?,?,?)");
  q.bind(1, b.program_id).bind(2, b.base_ir.hex()).bind(3, b.base_runtime).bind(4, b.o3_ir.hex());
  q.bind(5, b.o3_runtime).step();
}

std::optional<Baseline> Store::baseline(const std::string& program_id) const {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT program, base_ir, base_runtime, o3_ir, o3_runtime FROM baselines WHERE program=?");
  if (!q.bind(1, program_id).step()) return std::nullopt;
  return read_baseline(q);
}

std::vector<Baseline> Store::baselines() const {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT program, base_ir, base_runtime, o3_ir, o3_runtime FROM baselines ORDER BY program");
  std::vector<Baseline> out;
  while (q.step()) out.push_back(read_baseline(q));
  return out;
}

void Store::record_fault(const std::string& key, const std::string& message) {
  std::lock_guard lock(mu_);
  Stmt q(db_, "INSERT INTO faults(key, message, at) VALUES(?,?,?)");
  q.bind(1, key).bind(2, message).bind(3, now_millis()).step();
}

std::vector<FaultRecord> Store::faults() const {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT key, message, at FROM faults ORDER BY rowid");
  std::vector<FaultRecord> out;
  while (q.step()) out.push_back({q.text(0), q.text(1), q.integer(2)});
  return out;
}

void Store::save_run(const RunRecord& run) {
  std::lock_guard lock(mu_);
  Stmt q(db_, "INSERT OR REPLACE INTO runs(run_id, config, step) VALUES(?,?,?)");
  q.bind(1, run.run_id).bind(2, run.config_json).bind(3, run.step).step();
}

std::optional<RunRecord> Store::load_run(const std::string& run_id) const {
  std::lock_guard lock(mu_);
  Stmt q(db_, "SELECT run_id, config, step FROM runs WHERE run_id=?");
  if (!q.bind(1, run_id).step()) return std::nullopt;
  return RunRecord{q.text(0), q.text(1), q.integer(2)};
}

VerifyReport Store::verify() const {
  std::vector<std::string> ids;
  {
    std::lock_guard lock(mu_);
    Stmt q(db_, "SELECT id FROM ir_artifacts ORDER BY id");
    while (q.step()) ids.push_back(q.text(0));
  }
  VerifyReport report;
  report.checked = ids.size();
  for (const auto& hex : ids) {
    const IrId id = Digest::from_hex(hex);
    std::string body;
    if (root_.empty()) {
      std::lock_guard lock(mu_);
      Stmt q(db_, "SELECT body FROM ir_bodies WHERE id=?");
      if (!q.bind(1, hex).step()) {
        report.missing.push_back(hex);
        continue;
      }
      body = q.text(0);
    } else {
      std::ifstream in(ir_path(id), std::ios::binary);
      if (!in) {
        report.missing.push_back(hex);
        continue;
      }
      std::ostringstream ss;
      ss << in.rdbuf();
      body = ss.str();
    }
    if (ir_id(body) != id) report.corrupt.push_back(hex);
  }
  return report;
}

}  // namespace qpass
