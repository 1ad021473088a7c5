#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "qpass/ir.hpp"
#include "qpass/state.hpp"

struct sqlite3;

namespace qpass {

struct Baseline {
  std::string program_id;
  IrId base_ir;
  double base_runtime = 0.0;
  IrId o3_ir;
  double o3_runtime = 0.0;
};

struct FaultRecord {
  std::string key;
  std::string message;
  std::int64_t at = 0;
};

struct RunRecord {
  std::string run_id;
  std::string config_json;
  std::int64_t step = 0;
};

struct VerifyReport {
  std::size_t checked = 0;
  std::vector<std::string> corrupt;  // ids whose body no longer hashes to the id
  std::vector<std::string> missing;  // ids referenced in the index without a body file
  bool ok() const { return corrupt.empty() && missing.empty(); }
};

/// Durable store for IR bodies, transitions, runtimes and run metadata.
///
/// Layout under `root`:
///   ir/<hex id>.ll   IR bodies, content addressed
///   store.db         SQLite tables: ir_artifacts, states, transitions,
///                    runtimes, baselines, faults, runs
///
/// An empty root gives a purely in-memory store. All methods are safe to call
/// concurrently; writes are serialized.
class Store {
 public:
  explicit Store(std::filesystem::path root = {});
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  const std::filesystem::path& root() const { return root_; }

  /// No-op when the id is already stored.
  IrId put_ir(const IrArtifact& artifact);
  IrId put_ir(const std::string& body) { return put_ir(IrArtifact::base(body)); }
  /// Throws IntegrityError if the stored body does not rehash to `id`, Error if absent.
  std::string get_ir(const IrId& id) const;
  bool has_ir(const IrId& id) const;
  std::size_t ir_count() const;

  /// Throws IntegrityError when `record.result_ir` is not stored.
  void upsert_transition(const TransitionRecord& record);
  std::optional<TransitionRecord> lookup(const TransitionKey& key) const;
  std::vector<TransitionRecord> transitions() const;
  std::size_t transition_count() const;

  void put_state(const AgentState& state);
  std::optional<AgentState> get_state(const Fingerprint& fp) const;

  void put_runtime(const IrId& ir, double seconds, const std::string& policy);
  std::optional<double> runtime(const IrId& ir) const;

  void put_baseline(const Baseline& b);
  std::optional<Baseline> baseline(const std::string& program_id) const;
  std::vector<Baseline> baselines() const;

  void record_fault(const std::string& key, const std::string& message);
  std::vector<FaultRecord> faults() const;

  void save_run(const RunRecord& run);
  std::optional<RunRecord> load_run(const std::string& run_id) const;

  VerifyReport verify() const;

 private:
  std::filesystem::path ir_path(const IrId& id) const;
  void exec(const char* sql) const;

  std::filesystem::path root_;
  sqlite3* db_ = nullptr;
  mutable std::mutex mu_;
  mutable std::unordered_map<IrId, std::string> ir_cache_;
};

}  // namespace qpass
