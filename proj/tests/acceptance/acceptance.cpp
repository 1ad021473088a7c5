// End-to-end acceptance checks. Prints one PASS/FAIL/SKIP line per check and
// exits non-zero if any check fails. Optional arguments select checks by name.

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qpass/agent.hpp"
#include "qpass/environment.hpp"
#include "qpass/orchestrator.hpp"
#include "qpass/qnetwork.hpp"
#include "qpass/report.hpp"
#include "qpass/run_log.hpp"
#include "qpass/synthetic_backend.hpp"

using namespace qpass;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  enum class Status { pass, fail, skip } status = Status::fail;
  std::string detail;
};

Outcome pass(std::string d) { return {Outcome::Status::pass, std::move(d)}; }
Outcome fail(std::string d) { return {Outcome::Status::fail, std::move(d)}; }
Outcome skip(std::string d) { return {Outcome::Status::skip, std::move(d)}; }

std::string cli_path;

struct Scratch {
  fs::path path;
  Scratch() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("qpass_accept_" + std::to_string(rd()) + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

Invocation invocation_of(const ActionSpace& space, int action) {
  return std::get<Invocation>(decode(space, action, std::nullopt));
}

/// Smallest noise-free runtime over every action sequence of length <= depth.
double brute_force_optimum(SyntheticBackend& backend, const ActionSpace& space, const std::string& body, int depth,
                           std::map<std::string, double>& memo) {
  double best = backend.true_runtime(body);
  if (depth == 0) return best;
  const std::string key = std::to_string(depth) + "|" + body;
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  for (int a = 0; a < static_cast<int>(space.size()); ++a)
    best = std::min(best, brute_force_optimum(backend, space, backend.optimize(body, invocation_of(space, a)), depth - 1, memo));
  memo[key] = best;
  return best;
}

// ---------------------------------------------------------------------------

Outcome synthetic_oracle() {
  std::ostringstream detail;
  bool ok = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    Scratch dir;
    RunConfig c;
    c.run_id = "oracle";
    c.synthetic_programs = 5;
    c.split_valid = 0;
    c.catalog = "synthetic";
    c.synthetic.n_actions = 6;
    c.synthetic.seed = seed;
    c.train.mu_max = 4;
    c.train.gamma = 1.0;
    c.train.seed = seed;
    c.train.blocks = 2;
    c.train.width = 128;
    c.train.batch_size = 64;
    c.train.learning_rate = 1e-3;
    c.train.learning_rate_end = 2e-5;
    c.train.lr_anneal_steps = 20000;
    c.train.tau = 200;
    c.train.delta = 5000;
    c.train.eps_anneal_steps = 8000;
    c.replay_min_fill = 256;
    c.total_steps = 20000;
    c.store = dir.path / "store";
    c.output = dir.path / "out";

    const auto t0 = std::chrono::steady_clock::now();
    Orchestrator o(c, [c] { return make_backend(c); });
    o.train();
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;

    SyntheticBackend oracle(c.synthetic);
    const auto space = build_space(Level::H, Catalogs::synthetic(6));
    int within = 0;
    std::string ratios;
    for (const auto& src : load_programs(c)) {
      std::map<std::string, double> memo;
      const double best = brute_force_optimum(oracle, space, oracle.lower_source(src), 4, memo);
      const auto t = o.greedy_rollout(src.id);
      const double agent = oracle.true_runtime(o.store().get_ir(t.final_state().ir));
      if (!t.faulted && agent <= 1.02 * best) ++within;
      ratios += (ratios.empty() ? "" : " ") + fmt(agent / best, 4);
    }
    detail << "seed " << seed << ": " << within << "/5 (agent/optimum " << ratios << ", "
           << o.store().transition_count() << " transitions) in " << fmt(minutes, 2) << " min; ";
    ok = ok && within >= 4 && minutes < 10.0;
  }
  return ok ? pass(detail.str()) : fail(detail.str());
}

// ---------------------------------------------------------------------------

/// Counts optimizer calls made through any backend it builds.
class CountingBackend final : public Backend {
 public:
  CountingBackend(SyntheticConfig c, std::shared_ptr<std::atomic<int>> calls) : inner_(c), calls_(std::move(calls)) {}
  std::string name() const override { return inner_.name(); }
  std::string lower_source(const ProgramSource& s) override { return inner_.lower_source(s); }
  std::string optimize(const std::string& body, const Invocation& inv) override {
    ++*calls_;
    return inner_.optimize(body, inv);
  }
  std::string optimize_o3(const std::string& body) override { return inner_.optimize_o3(body); }
  std::unique_ptr<Runnable> compile(const std::string& body, const std::string& id) override {
    return inner_.compile(body, id);
  }

 private:
  SyntheticBackend inner_;
  std::shared_ptr<std::atomic<int>> calls_;
};

Outcome parameter_chains() {
  Scratch dir;
  const fs::path catalog = dir.path / "catalog";
  fs::create_directories(catalog);
  std::ofstream(catalog / "o3_actions.tsv") << "0\tpp\n";
  std::ofstream(catalog / "pass_parameters.tsv") << "pp\ta\tx0,x1\npp\tb\ty0,y1\n";
  std::ofstream(catalog / "analysis_passes.txt") << "";
  const std::vector<std::pair<std::string, std::string>> settings{{"x0", "y0"}, {"x0", "y1"}, {"x1", "y0"}, {"x1", "y1"}};

  // Fixture: the first world whose best parameterization is unique and beats the base program.
  SyntheticConfig world;
  std::pair<std::string, std::string> best_setting;
  double best_runtime = 0.0;
  for (world.seed = 1;; ++world.seed) {
    SyntheticBackend b(world);
    const std::string base = b.lower_source({"prog_000", {}, "prog_000"});
    std::vector<double> times;
    for (const auto& [x, y] : settings)
      times.push_back(b.true_runtime(b.optimize(base, Invocation{{"pp"}, {{"a", x}, {"b", y}}})));
    const auto it = std::min_element(times.begin(), times.end());
    if (std::count(times.begin(), times.end(), *it) == 1 && *it < b.true_runtime(base)) {
      best_setting = settings[static_cast<std::size_t>(it - times.begin())];
      best_runtime = *it;
      break;
    }
  }

  std::ostringstream detail;
  int picked_best = 0;
  bool mechanics = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    RunConfig c;
    c.run_id = "chains";
    c.synthetic_programs = 1;
    c.split_valid = 0;
    c.level = Level::L;
    c.catalog = catalog.string();
    c.synthetic = world;
    c.train.mu_max = 1;
    c.train.seed = seed;
    c.train.blocks = 1;
    c.train.width = 32;
    c.train.batch_size = 4;
    c.train.tau = 50;
    c.train.delta = 1000;
    c.train.eps_anneal_steps = 1000;
    c.replay_min_fill = 4;
    c.total_steps = 3000;
    c.store = dir.path / ("store" + std::to_string(seed));
    c.output = dir.path / ("out" + std::to_string(seed));
    auto calls = std::make_shared<std::atomic<int>>(0);
    Orchestrator o(c, [c, calls] { return std::make_unique<CountingBackend>(c.synthetic, calls); });
    o.train();

    const auto& space = o.space();
    int intermediate = 0, completed = 0;
    for (const auto& e : o.replay().contents()) {
      const ActionSpec& a = space.at(e.a);
      const bool completes = a.kind == ActionSpec::Kind::parameter_value && a.parameter == "b";
      if (completes) {
        ++completed;
        mechanics = mechanics && e.discount == c.train.gamma;
      } else {
        ++intermediate;
        mechanics = mechanics && e.r == 0.0 && e.discount == 1.0 && !e.terminal;
      }
    }
    // Every completed chain reached the optimizer exactly once, and nothing else did.
    mechanics = mechanics && completed == 4 && calls->load() == completed &&
                o.stats().tasks_issued == static_cast<std::uint64_t>(completed);

    const auto t = o.greedy_rollout("prog_000");
    const double agent = SyntheticBackend(world).true_runtime(o.store().get_ir(t.final_state().ir));
    if (agent == best_runtime && t.actions.size() == 3) ++picked_best;
    detail << "seed " << seed << ": " << format_sequence(t.actions) << ", " << calls->load() << " optimizer calls for "
           << completed << " chains, " << intermediate << " intermediate experiences; ";
  }
  detail << "best " << best_setting.first << "/" << best_setting.second << " picked " << picked_best << "/3";
  return mechanics && picked_best == 3 ? pass(detail.str()) : fail(detail.str());
}

// ---------------------------------------------------------------------------

Outcome tabular_convergence() {
  constexpr int S = 5, A = 3;
  constexpr double gamma = 0.9;
  // Deterministic dynamics; state 4 is absorbing with zero reward, reached only through (3, 2).
  const int next[S][A] = {{1, 2, 0}, {2, 0, 3}, {3, 1, 0}, {0, 2, 4}, {4, 4, 4}};
  const double reward[S][A] = {{0.1, -0.2, 0.0}, {0.5, 0.0, -0.3}, {-0.1, 0.4, 0.2}, {0.3, -0.5, 1.0}, {0, 0, 0}};
  const bool terminal[S][A] = {{}, {}, {}, {false, false, true}, {true, true, true}};

  double q[S][A] = {};
  for (int it = 0; it < 2000; ++it) {
    double nq[S][A];
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const int n = next[s][a];
        const double v = std::max({q[n][0], q[n][1], q[n][2]});
        nq[s][a] = reward[s][a] + (terminal[s][a] ? 0.0 : gamma * v);
      }
    std::copy(&nq[0][0], &nq[0][0] + S * A, &q[0][0]);
  }

  auto onehot = [](int s) {
    std::vector<double> v(S, 0.0);
    v[static_cast<std::size_t>(s)] = 1.0;
    return v;
  };
  std::vector<TrainingSample> batch;
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      batch.push_back({onehot(s), a, reward[s][a], gamma, terminal[s][a], onehot(next[s][a]), std::vector<bool>(A, true), true});

  TrainConfig tc;
  tc.gamma = gamma;
  tc.tau = 50;
  tc.delta = 50;
  tc.learning_rate = 3e-3;
  tc.clip_norm = 0.0;
  tc.stop_floor = false;
  tc.seed = 5;
  Learner learner({S, A, 1, 32}, tc);

  const auto t0 = std::chrono::steady_clock::now();
  double err = 0.0;
  int steps = 0;
  for (; steps < 50000; ++steps) {
    if (steps == 25000) learner.optimizer().set_learning_rate(3e-4);
    if (steps == 40000) learner.optimizer().set_learning_rate(3e-5);
    learner.train_step(batch);
  }
  for (int s = 0; s < S; ++s) {
    const auto v = learner.online().q_values(onehot(s));
    for (int a = 0; a < A; ++a) err = std::max(err, std::abs(v[static_cast<std::size_t>(a)] - q[s][a]));
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::string d = "L-inf " + fmt(err) + " after " + std::to_string(steps) + " steps in " + fmt(seconds, 3) + " s";
  return err < 1e-2 && seconds < 120.0 ? pass(d) : fail(d);
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
  constexpr int D = 6, A = 4;
  QNetwork net({D, A, 2, 8}, 11);
  QNetwork target({D, A, 2, 8}, 12);
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n01;
  std::vector<TrainingSample> batch;
  for (int i = 0; i < 6; ++i) {
    TrainingSample s;
    for (int k = 0; k < D; ++k) s.state.push_back(n01(rng));
    for (int k = 0; k < D; ++k) s.next_state.push_back(n01(rng));
    s.action = i % A;
    s.reward = n01(rng);
    s.discount = 0.9;
    s.terminal = i == 5;
    s.next_mask = {true, i % 2 == 0, true, true};
    batch.push_back(s);
  }
  TrainConfig tc;
  tc.stop_floor = false;

  const ParameterSet analytic = gradients(net, batch, target, tc);
  const double h = 1e-5;
  double worst = 0.0;
  std::size_t coords = 0;
  for (std::size_t p = 0; p < net.parameters().size(); ++p) {
    auto& m = net.parameters()[p];
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + h;
      const double up = td_loss(batch, net, target, tc).loss;
      m.data()[i] = saved - h;
      const double down = td_loss(batch, net, target, tc).loss;
      m.data()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double exact = analytic[p].data()[i];
      const double scale = std::max({std::abs(numeric), std::abs(exact), 1e-8});
      worst = std::max(worst, std::abs(numeric - exact) / scale);
      ++coords;
    }
  }
  const std::string d = "max relative error " + fmt(worst, 3) + " over " + std::to_string(coords) + " coordinates";
  return worst < 1e-4 ? pass(d) : fail(d);
}

// ---------------------------------------------------------------------------

Outcome reward_telescoping() {
  SyntheticConfig sc;
  sc.n_actions = 8;
  SyntheticBackend backend(sc);
  const auto space = build_space(Level::H, Catalogs::synthetic(8));
  Store store;
  const int mu = 16;
  Environment env(backend, BenchmarkPolicy{}, space, mu, store);
  std::mt19937_64 rng(21);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::string id = "traj_" + std::to_string(t % 40);
    const std::string body = backend.lower_source({id, {}, id});
    AgentState s = AgentState::base(store.put_ir(body), id);
    const int len = std::uniform_int_distribution<int>(0, mu)(rng);
    double sum = 0.0;
    for (int k = 0; k < len; ++k) {
      const auto r = env.step(s, std::uniform_int_distribution<int>(0, 7)(rng));
      sum += r.reward;
      s = r.next;
    }
    const double expected = std::log(backend.true_runtime(body) / backend.true_runtime(store.get_ir(s.ir)));
    worst = std::max(worst, std::abs(sum - expected));
  }
  const std::string d = "max |sum r - ln(T_base/T_final)| = " + fmt(worst, 3) + " over 1000 trajectories";
  return worst <= 1e-9 ? pass(d) : fail(d);
}

// ---------------------------------------------------------------------------

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

Outcome catalog_fidelity() {
  const std::vector<std::vector<std::string>> table = {
      {"tti", "verify", "tbaa", "scoped-noalias", "simplifycfg", "sroa", "early-cse", "lower-expect"},
      {"targetlibinfo", "tti", "forceattrs", "tbaa", "scoped-noalias", "inferattrs", "ipsccp", "globalopt", "mem2reg",
       "deadargelim", "instcombine", "simplifycfg"},
      {"globals-aa", "prune-eh", "inline", "functionattrs", "argpromotion", "sroa", "early-cse", "jump-threading",
       "correlated-propagation", "simplifycfg"},
      {"instcombine", "tailcallelim", "simplifycfg"},
      {"reassociate", "loop-rotate", "licm", "loop-unswitch", "simplifycfg"},
      {"instcombine", "indvars", "loop-idiom", "loop-deletion", "loop-unroll", "mldst-motion", "gvn", "memcpyopt", "sccp",
       "bdce", "instcombine", "jump-threading", "correlated-propagation", "dse", "licm", "adce", "simplifycfg"},
      {"instcombine", "barrier", "rpo-functionattrs", "elim-avail-extern", "globals-aa", "float2int", "loop-rotate",
       "loop-vectorize", "instcombine", "slp-vectorizer", "simplifycfg"},
      {"instcombine", "loop-unroll", "instcombine", "licm", "alignment-from-assumptions", "strip-dead-prototypes",
       "globaldce", "constmerge"},
  };
  const fs::path dir = QPASS_DATA_DIR "/catalog";
  const auto catalogs = Catalogs::load(dir);
  const auto h = build_space(Level::H, catalogs);
  const auto m = build_space(Level::M, catalogs);
  const auto l = build_space(Level::L, catalogs);

  bool lists_match = h.size() == table.size();
  std::size_t slots = 0;
  for (std::size_t i = 0; lists_match && i < table.size(); ++i) {
    lists_match = h.at(static_cast<int>(i)).passes == table[i];
    slots += h.at(static_cast<int>(i)).passes.size();
  }

  // Independent count of the parameter values listed in the catalog file.
  std::size_t values = 0;
  std::set<std::string> tunable;
  std::ifstream in(dir / "pass_parameters.tsv");
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, '\t');) cols.push_back(c);
    if (cols.size() != 3) continue;
    tunable.insert(cols[0]);
    values += static_cast<std::size_t>(std::count(cols[2].begin(), cols[2].end(), ',')) + 1;
  }
  std::set<std::string> distinct;
  for (const auto& seq : table) distinct.insert(seq.begin(), seq.end());
  std::size_t analysis = 0;
  std::ifstream an(dir / "analysis_passes.txt");
  for (std::string line; std::getline(an, line);)
    if (!split_ws(line).empty()) ++analysis;

  std::ostringstream d;
  d << "H " << h.size() << " lists (" << slots << " slots, verbatim " << (lists_match ? "yes" : "no") << "), M "
    << m.size() << ", L " << l.size() << " = 42 + " << values << " counted values";
  const bool ok = lists_match && slots == 74 && m.size() == 42 && distinct.size() - analysis == 42 &&
                  l.size() == 42 + values;
  return ok ? pass(d.str()) : fail(d.str());
}

// ---------------------------------------------------------------------------

Outcome stop_rule() {
  const int mu = 16;
  const auto space = build_space(Level::H, Catalogs::synthetic(3));
  const AgentState start = AgentState::base(ir_id("0,1"), "p");
  auto step = [&](const AgentState& s, int a) {
    AgentState n = s;
    n.history = append_action(s.history, space.at(a), mu);
    return n;
  };
  const double eps = 1e-12;
  int cases = 0, wrong = 0;
  // The best legal Q at depth d is `late` from depth k on and +eps before it.
  for (double late : {-eps, 0.0, eps}) {
    for (int k = 0; k <= mu; ++k) {
      for (int best_action = 0; best_action < 3; ++best_action) {
        auto q = [&](const AgentState& s) {
          const double top = s.history.pass_count >= k ? late : eps;
          std::vector<double> v(3, top - 1.0);
          v[static_cast<std::size_t>(best_action)] = top;
          return v;
        };
        const auto t = rollout(space, mu, start, q, step);
        const std::size_t expected = late > 0.0 ? static_cast<std::size_t>(mu) : static_cast<std::size_t>(k);
        bool ok = t.actions.size() == expected;
        for (int a : t.actions) ok = ok && a == best_action;
        ++cases;
        if (!ok) ++wrong;
      }
    }
  }
  const std::string d = std::to_string(cases - wrong) + "/" + std::to_string(cases) + " scripted cases";
  return wrong == 0 ? pass(d) : fail(d);
}

// ---------------------------------------------------------------------------

class NoisyProgram final : public Runnable {
 public:
  NoisyProgram(double truth, std::uint64_t seed) : truth_(truth), rng_(seed) {}
  double run() override { return truth_ * (1.0 + noise_(rng_)); }

 private:
  double truth_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 0.05};
};

Outcome benchmarking_policy() {
  const BenchmarkPolicy policy;
  bool bounds = true;
  for (double t = 1e-7; t < 1e4; t *= 1.1) {
    const int r = policy.repetitions(t);
    bounds = bounds && r >= BenchmarkPolicy::kMinReps && r <= BenchmarkPolicy::kMaxReps;
  }
  std::ostringstream d;
  bool ok = bounds;
  d << "counts in [20,1000]: " << (bounds ? "yes" : "no");
  for (double truth : {0.002, 0.05, 0.5}) {
    int good = 0, reps = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      NoisyProgram p(truth, 1000 + static_cast<std::uint64_t>(trial));
      const auto m = measure_runtime(p, policy);
      reps = m.repetitions;
      if (std::abs(m.median_seconds - truth) <= 0.02 * truth) ++good;
    }
    d << "; " << reps << " reps: " << good << "/1000 within 2%";
    ok = ok && reps >= 100 && good >= 990;
  }
  return ok ? pass(d.str()) : fail(d.str());
}

// ---------------------------------------------------------------------------

pid_t spawn_worker(const fs::path& config, const std::string& manager, const std::string& name) {
  const pid_t pid = ::fork();
  if (pid == 0) {
    const std::string cfg = config.string();
    const int null = ::open("/dev/null", O_WRONLY);
    if (null >= 0) ::dup2(null, STDERR_FILENO);
    ::execl(cli_path.c_str(), cli_path.c_str(), "--config", cfg.c_str(), "worker", "--manager", manager.c_str(), "--id",
            name.c_str(), static_cast<char*>(nullptr));
    std::_Exit(127);
  }
  return pid;
}

Outcome distribution_durability() {
  if (cli_path.empty() || !fs::exists(cli_path)) return fail("worker executable not given");
  Scratch dir;
  RunConfig c;
  c.run_id = "durable";
  c.synthetic_programs = 10;
  c.catalog = "synthetic";
  c.synthetic.n_actions = 6;
  c.synthetic.delay_ms = 30;
  c.train.mu_max = 4;
  c.train.tau = 20;
  c.train.delta = 100;
  c.train.blocks = 1;
  c.train.width = 32;
  c.replay_min_fill = 120;
  c.total_steps = 300;
  c.execution = "server";
  c.local_workers = 0;
  c.store = dir.path / "store";
  c.output = dir.path / "out";
  const fs::path cfg = dir.path / "run.json";
  std::ofstream(cfg) << to_json(c);

  Orchestrator o(c, {});
  std::string error;
  std::thread run([&] {
    try {
      o.train();
    } catch (const std::exception& e) {
      error = e.what();
    }
  });

  const fs::path port_file = c.output / "manager.port";
  for (int i = 0; i < 200 && !fs::exists(port_file); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  std::string port;
  std::ifstream(port_file) >> port;
  std::vector<pid_t> workers;
  for (int i = 0; i < 3; ++i) workers.push_back(spawn_worker(cfg, "127.0.0.1:" + port, "w" + std::to_string(i)));

  std::this_thread::sleep_for(std::chrono::milliseconds(1500));
  int killed_status = 0;
  ::kill(workers[0], SIGKILL);
  ::waitpid(workers[0], &killed_status, 0);
  const bool killed_mid_run = WIFSIGNALED(killed_status) && o.step() < c.total_steps;
  run.join();
  o.stop_dispatch();
  int clean = 0;
  for (std::size_t i = 1; i < workers.size(); ++i) {
    int status = 0;
    ::waitpid(workers[i], &status, 0);
    if (WIFEXITED(status) && WEXITSTATUS(status) == 0) ++clean;
  }

  std::size_t missing = 0;
  for (const auto& key : o.issued_keys())
    if (!o.store().lookup(key)) ++missing;
  const std::size_t records = o.store().transition_count();
  const std::size_t issued = o.issued_keys().size();
  const auto stats = o.stats();

  RunConfig again = c;
  again.execution = "inline";
  again.total_steps = c.total_steps;
  Orchestrator restarted(again, [again] { return make_backend(again); });
  restarted.init();
  const auto rebaselined = restarted.stats().baseline_tasks;

  std::ostringstream d;
  d << "run " << (error.empty() ? "completed" : "failed: " + error) << " at step " << o.step() << "; worker killed mid-run "
    << (killed_mid_run ? "yes" : "no") << "; " << issued << " tasks, " << records << " records, " << missing
    << " missing, " << stats.faults << " faults; survivors exited cleanly " << clean << "/2; warm restart baseline tasks "
    << rebaselined;
  const bool ok = error.empty() && killed_mid_run && o.step() == c.total_steps && missing == 0 && records == issued &&
                  clean == 2 && rebaselined == 0;
  return ok ? pass(d.str()) : fail(d.str());
}

// ---------------------------------------------------------------------------

Outcome report_fidelity() {
  if (cli_path.empty() || !fs::exists(cli_path)) return fail("report executable not given");
  Scratch dir;
  const fs::path log = dir.path / "run_log.jsonl";
  {
    RunLog out(log);
    auto row = [&](const std::string& id, double o3, double agent, const std::string& seq) {
      out.write({1000, "eval:train", id, "o3_speedup", o3});
      out.write({1000, "eval:train", id, "agent_speedup", agent});
      out.write({1000, "eval:train", id, "sequence", seq});
    };
    row("floyd-warshall.c", 4.55, 3.19, "4→7→7→6→6→6→6→6→6→6→4→6→6→6→6→6");
    row("dynprog.c", 2.91, 3.85, "4→5→4→5→0→5→5→7→3→5→1→3→3→3→3→3");
  }
  const fs::path printed = dir.path / "report.txt";
  const std::string cmd = "\"" + cli_path + "\" report \"" + log.string() + "\" > \"" + printed.string() + "\"";
  const int rc = std::system(cmd.c_str());
  std::ifstream in(printed);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto line_with = [&](const std::string& id) {
    std::istringstream ss(text);
    for (std::string line; std::getline(ss, line);)
      if (line.find(id) != std::string::npos) return line;
    return std::string{};
  };
  const std::string dp = line_with("dynprog.c"), fw = line_with("floyd-warshall.c");
  const bool ok = rc == 0 && dp.find("1.32x") != std::string::npos && fw.find("0.70x") != std::string::npos;
  return ok ? pass("dynprog.c 1.32x, floyd-warshall.c 0.70x") : fail("exit " + std::to_string(rc) + "; got: " + dp + " | " + fw);
}

// ---------------------------------------------------------------------------

bool on_path(const std::string& tool) {
  return std::system(("command -v " + tool + " > /dev/null 2>&1").c_str()) == 0;
}

Outcome llvm_pipeline() {
  if (!on_path("opt") || !on_path("clang")) return skip("no LLVM toolchain with opt and clang on PATH");
  Scratch dir;
  const fs::path src = dir.path / "src";
  fs::create_directories(src);
  std::ofstream(src / "sum.c") << "#include <stdio.h>\nint main(void){volatile long s=0;for(long i=0;i<2000000;++i)s+=i%7;"
                                  "printf(\"%ld\\n\",(long)s);return 0;}\n";
  std::ofstream(src / "mat.c") << "#include <stdio.h>\nstatic double a[64][64],b[64][64],c[64][64];\nint main(void){"
                                  "for(int i=0;i<64;++i)for(int j=0;j<64;++j){a[i][j]=i+j;b[i][j]=i-j;}"
                                  "for(int i=0;i<64;++i)for(int j=0;j<64;++j)for(int k=0;k<64;++k)c[i][j]+=a[i][k]*b[k][j];"
                                  "printf(\"%f\\n\",c[3][5]);return 0;}\n";
  RunConfig c;
  c.run_id = "llvm";
  c.backend = "llvm";
  c.dataset = src;
  c.synthetic_programs = 0;
  c.split_valid = 0;
  c.train.mu_max = 2;
  c.train.tau = 5;
  c.train.delta = 10;
  c.train.blocks = 1;
  c.train.width = 16;
  c.train.batch_size = 4;
  c.replay_min_fill = 4;
  c.total_steps = 10;
  c.policy.tiers = {{1e9, 20}};
  c.store = dir.path / "store";
  c.output = dir.path / "out";
  try {
    Orchestrator o(c, [c] { return make_backend(c); });
    o.train();
    const auto r = o.evaluate();
    std::ostringstream d;
    bool ok = r.faults.empty() && r.programs.size() == 2;
    for (const auto& e : r.programs) {
      ok = ok && std::isfinite(e.agent_speedup) && e.agent_speedup > 0.0;
      d << e.program_id << " " << format_ratio(e.agent_speedup) << "; ";
    }
    return ok ? pass(d.str()) : fail(d.str());
  } catch (const std::exception& e) {
    return fail(e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg.rfind("--cli=", 0) == 0) cli_path = arg.substr(6);
    else only.push_back(arg);
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"synthetic_oracle", synthetic_oracle},
      {"parameter_chains", parameter_chains},
      {"tabular_convergence", tabular_convergence},
      {"gradient_check", gradient_check},
      {"reward_telescoping", reward_telescoping},
      {"catalog_fidelity", catalog_fidelity},
      {"stop_rule", stop_rule},
      {"benchmarking_policy", benchmarking_policy},
      {"distribution_durability", distribution_durability},
      {"report_fidelity", report_fidelity},
      {"llvm_pipeline", llvm_pipeline},
  };
  int failed = 0;
  for (const auto& [name, check] : checks) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Outcome r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r = fail(std::string("exception: ") + e.what());
    }
    const char* tag = r.status == Outcome::Status::pass ? "PASS" : r.status == Outcome::Status::skip ? "SKIP" : "FAIL";
    if (r.status == Outcome::Status::fail) ++failed;
    std::cout << tag << "  " << name << ": " << r.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
