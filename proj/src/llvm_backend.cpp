#include "qpass/llvm_backend.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "qpass/errors.hpp"

namespace qpass {

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw EnvironmentFault("cannot write " + p.string());
}

std::atomic<std::uint64_t> g_scratch_counter{0};

class NativeRunnable final : public Runnable {
 public:
  NativeRunnable(std::filesystem::path exe, std::vector<std::string> args, std::chrono::seconds timeout)
      : exe_(std::move(exe)), args_(std::move(args)), timeout_(timeout) {}
  ~NativeRunnable() override {
    std::error_code ec;
    std::filesystem::remove(exe_, ec);
  }
  double run() override {
    std::vector<std::string> argv{exe_.string()};
    argv.insert(argv.end(), args_.begin(), args_.end());
    const auto r = run_process(argv, timeout_);
    if (r.timed_out) throw TimeoutFault("benchmark " + exe_.filename().string() + " timed out", r.stderr_text);
    if (r.exit_code != 0)
      throw EnvironmentFault("benchmark exited with status " + std::to_string(r.exit_code), r.stderr_text);
    return r.seconds;
  }

 private:
  std::filesystem::path exe_;
  std::vector<std::string> args_;
  std::chrono::seconds timeout_;
};

}  // namespace

std::map<std::string, std::vector<std::string>> LlvmConfig::parse_manifest(const std::string& text) {
  std::map<std::string, std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string id;
    if (!std::getline(ls, id, '\t') || id.empty()) continue;
    std::vector<std::string> argv;
    std::string arg;
    while (ls >> arg) argv.push_back(arg);
    out[id] = std::move(argv);
  }
  return out;
}

std::filesystem::path find_executable(const std::string& name) {
  if (name.find('/') != std::string::npos) return access(name.c_str(), X_OK) == 0 ? name : std::string{};
  const char* path = std::getenv("PATH");
  if (!path) return {};
  std::istringstream in(path);
  std::string dir;
  while (std::getline(in, dir, ':')) {
    const auto candidate = std::filesystem::path(dir) / name;
    if (access(candidate.c_str(), X_OK) == 0) return candidate;
  }
  return {};
}

ProcessResult run_process(const std::vector<std::string>& argv, std::chrono::milliseconds timeout,
                          const std::filesystem::path& stdout_path) {
  ProcessResult result;
  char err_template[] = "/tmp/qpass-stderr-XXXXXX";
  const int err_fd = mkstemp(err_template);
  if (err_fd < 0) throw EnvironmentFault("cannot create stderr capture file");

  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  const auto start = std::chrono::steady_clock::now();
  const pid_t pid = fork();
  if (pid < 0) {
    close(err_fd);
    unlink(err_template);
    throw EnvironmentFault("fork failed");
  }
  if (pid == 0) {
    const int out_fd = stdout_path.empty() ? open("/dev/null", O_WRONLY)
                                           : open(stdout_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (out_fd >= 0) dup2(out_fd, STDOUT_FILENO);
    dup2(err_fd, STDERR_FILENO);
    execvp(cargv[0], cargv.data());
    _exit(127);
  }

  std::mutex mu;
  std::condition_variable cv;
  bool done = false;
  std::atomic<bool> killed{false};
  std::thread watchdog([&] {
    std::unique_lock lock(mu);
    if (!cv.wait_for(lock, timeout, [&] { return done; })) {
      killed = true;
      kill(pid, SIGKILL);
    }
  });
  int status = 0;
  waitpid(pid, &status, 0);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  {
    std::lock_guard lock(mu);
    done = true;
  }
  cv.notify_all();
  watchdog.join();

  close(err_fd);
  result.stderr_text = slurp(err_template);
  unlink(err_template);
  result.timed_out = killed.load();
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  else if (WIFSIGNALED(status)) result.exit_code = 128 + WTERMSIG(status);
  return result;
}

LlvmBackend::LlvmBackend(LlvmConfig config) : config_(std::move(config)) {
  const auto base = config_.work_dir.empty() ? std::filesystem::temp_directory_path() : config_.work_dir;
  std::random_device rd;
  dir_ = base / ("qpass-llvm-" + std::to_string(getpid()) + "-" + std::to_string(rd()));
  std::filesystem::create_directories(dir_);
}

LlvmBackend::~LlvmBackend() {
  std::error_code ec;
  std::filesystem::remove_all(dir_, ec);
}

std::filesystem::path LlvmBackend::scratch(const std::string& stem) const {
  return dir_ / (stem + "-" + std::to_string(++g_scratch_counter));
}

std::string LlvmBackend::lower_source(const ProgramSource& source) {
  const auto ext = source.path.empty() ? std::string(".c") : source.path.extension().string();
  const bool cxx = ext == ".cpp" || ext == ".cc" || ext == ".cxx";
  const auto src = scratch("src").string() + ext;
  const auto out = scratch("base").string() + ".ll";
  spit(src, source.text);
  std::vector<std::string> argv{cxx ? config_.frontend_cxx : config_.frontend, "-O0", "-Xclang", "-disable-O0-optnone",
                                "-S", "-emit-llvm"};
  argv.insert(argv.end(), config_.frontend_flags.begin(), config_.frontend_flags.end());
  argv.insert(argv.end(), {src, "-o", out});
  const auto r = run_process(argv, config_.optimize_timeout);
  std::filesystem::remove(src);
  if (r.timed_out) throw TimeoutFault("frontend timed out on " + source.id, r.stderr_text);
  if (r.exit_code != 0) throw EnvironmentFault("frontend failed on " + source.id, r.stderr_text);
  std::string body = slurp(out);
  std::filesystem::remove(out);
  return body;
}

std::vector<std::string> LlvmBackend::optimizer_args(const Invocation& invocation) const {
  std::vector<std::string> args{config_.optimizer, "-S"};
  if (config_.pass_syntax == "legacy") {
    for (const auto& p : invocation.passes) args.push_back("-" + p);
  } else {
    std::string pipeline = "-passes=";
    for (std::size_t i = 0; i < invocation.passes.size(); ++i) pipeline += (i ? "," : "") + invocation.passes[i];
    args.push_back(pipeline);
  }
  for (const auto& [flag, value] : invocation.flags) args.push_back("-" + flag + "=" + value);
  return args;
}

std::string LlvmBackend::run_optimizer(const std::string& body, const std::vector<std::string>& args) {
  const auto in = scratch("in").string() + ".ll";
  const auto out = scratch("out").string() + ".ll";
  spit(in, body);
  std::vector<std::string> argv = args;
  argv.insert(argv.end(), {in, "-o", out});
  const auto r = run_process(argv, config_.optimize_timeout);
  std::filesystem::remove(in);
  if (r.timed_out) throw TimeoutFault("optimizer timed out", r.stderr_text);
  if (r.exit_code != 0) throw EnvironmentFault("optimizer exited with status " + std::to_string(r.exit_code),
                                               r.stderr_text);
  std::string result = slurp(out);
  std::filesystem::remove(out);
  return result;
}

std::string LlvmBackend::optimize(const std::string& body, const Invocation& invocation) {
  return run_optimizer(body, optimizer_args(invocation));
}

std::string LlvmBackend::optimize_o3(const std::string& body) {
  return run_optimizer(body, {config_.optimizer, "-S", "-O3"});
}

std::unique_ptr<Runnable> LlvmBackend::compile(const std::string& body, const std::string& program_id) {
  const auto in = scratch("exe-in").string() + ".ll";
  const auto exe = scratch("bench");
  spit(in, body);
  std::vector<std::string> argv{config_.frontend_cxx, "-O0", in, "-o", exe.string()};
  argv.insert(argv.end(), config_.link_flags.begin(), config_.link_flags.end());
  const auto r = run_process(argv, config_.optimize_timeout);
  std::filesystem::remove(in);
  if (r.timed_out) throw TimeoutFault("native compilation timed out", r.stderr_text);
  if (r.exit_code != 0) throw EnvironmentFault("native compilation failed", r.stderr_text);
  std::vector<std::string> args;
  if (auto it = config_.run_arguments.find(program_id); it != config_.run_arguments.end()) args = it->second;
  return std::make_unique<NativeRunnable>(exe, std::move(args), config_.run_timeout);
}

}  // namespace qpass
