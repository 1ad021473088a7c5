#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qpass/backend.hpp"

namespace qpass {

struct LlvmConfig {
  std::string frontend = "clang";   // C/C++ → IR, and IR → executable
  std::string frontend_cxx = "clang++";
  std::string optimizer = "opt";
  /// "new": `opt -passes=a,b`; "legacy": `opt -a -b` (LLVM ≤ 12 style).
  std::string pass_syntax = "new";
  std::vector<std::string> frontend_flags;
  std::vector<std::string> link_flags{"-lm"};
  std::chrono::seconds optimize_timeout{60};
  std::chrono::seconds run_timeout{300};
  /// program id → argv passed to the benchmark executable.
  std::map<std::string, std::vector<std::string>> run_arguments;
  std::filesystem::path work_dir;  // defaults to the system temp directory

  /// Reads `program_id <tab> argv...` lines.
  static std::map<std::string, std::vector<std::string>> parse_manifest(const std::string& text);
};

struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
  double seconds = 0.0;
  std::string stderr_text;
};

/// Runs argv with stdout redirected to `stdout_path` (or /dev/null) and
/// stderr captured; kills the child after `timeout`.
ProcessResult run_process(const std::vector<std::string>& argv, std::chrono::milliseconds timeout,
                          const std::filesystem::path& stdout_path = {});

/// Locates an executable on PATH; empty when absent.
std::filesystem::path find_executable(const std::string& name);

/// Drives the external LLVM toolchain through subprocesses. Every call owns
/// its temporary files.
class LlvmBackend final : public Backend {
 public:
  explicit LlvmBackend(LlvmConfig config);
  ~LlvmBackend() override;

  std::string name() const override { return "llvm"; }
  std::string lower_source(const ProgramSource& source) override;
  std::string optimize(const std::string& body, const Invocation& invocation) override;
  std::string optimize_o3(const std::string& body) override;
  std::unique_ptr<Runnable> compile(const std::string& body, const std::string& program_id) override;

  /// Optimizer command line for `invocation` (without input/output arguments).
  std::vector<std::string> optimizer_args(const Invocation& invocation) const;

  const LlvmConfig& config() const { return config_; }

 private:
  std::filesystem::path scratch(const std::string& stem) const;
  std::string run_optimizer(const std::string& body, const std::vector<std::string>& args);

  LlvmConfig config_;
  std::filesystem::path dir_;
};

}  // namespace qpass
