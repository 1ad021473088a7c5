#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qpass/checkpoint.hpp"
#include "qpass/environment.hpp"
#include "qpass/errors.hpp"
#include "qpass/orchestrator.hpp"
#include "qpass/report.hpp"
#include "qpass/run_config.hpp"
#include "qpass/store.hpp"
#include "qpass/worker.hpp"

using namespace qpass;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string level;
  std::string backend;
};

RunConfig resolve_config(const Globals& g, bool required) {
  RunConfig c;
  if (!g.config.empty()) c = load_run_config(g.config);
  else if (required) throw ConfigError("--config is required");
  if (g.seed) c.train.seed = *g.seed;
  if (!g.level.empty()) c.level = parse_level(g.level);
  if (!g.backend.empty()) c.backend = g.backend;
  return c;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_train(const Globals& g, std::int64_t steps) {
  RunConfig c = resolve_config(g, true);
  if (steps >= 0) c.total_steps = steps;
  c.validate();
  const RunConfig snapshot = c;
  Orchestrator o(c, [snapshot] { return make_backend(snapshot); });
  o.train();
  const auto& s = o.stats();
  std::cout << "trained to step " << o.step() << "; tasks " << s.tasks_issued << ", faults " << s.faults
            << ", transitions stored " << o.store().transition_count() << "\n";
  return 0;
}

int cmd_evaluate(const Globals& g) {
  RunConfig c = resolve_config(g, true);
  c.total_steps = 0;
  const RunConfig snapshot = c;
  Orchestrator o(c, [snapshot] { return make_backend(snapshot); });
  o.init();
  const auto report = o.evaluate();
  for (const auto& e : report.programs)
    std::cout << e.set << "\t" << e.program_id << "\t" << format_sequence(e.actions) << "\tO3 "
              << format_ratio(e.o3_speedup) << "\tagent " << format_ratio(e.agent_speedup) << "\n";
  for (const auto& [id, why] : report.faults) std::cout << "fault\t" << id << "\t" << why << "\n";
  return report.faults.empty() ? 0 : 1;
}

int cmd_optimize(const Globals& g, const std::string& checkpoint_path, const std::string& input,
                 const std::string& program, const std::string& output) {
  RunConfig c = resolve_config(g, false);
  auto ck = load_checkpoint(checkpoint_path);
  auto meta = [&](const std::string& k) -> std::string {
    auto it = ck.metadata.find(k);
    if (it == ck.metadata.end()) throw ConfigError("checkpoint lacks metadata '" + k + "'");
    return it->second;
  };
  const Level level = parse_level(meta("level"));
  if (!g.level.empty() && parse_level(g.level) != level)
    throw ConfigError("--level " + g.level + " does not match the checkpoint's level " + meta("level"));
  c.level = level;
  if (g.backend.empty()) c.backend = meta("backend");
  c.catalog = meta("catalog");
  c.train.mu_max = std::stoi(meta("mu_max"));
  c.synthetic.token_range = std::stoi(meta("token_range"));
  c.synthetic.n_actions = std::stoi(meta("synthetic_actions"));

  const auto space = build_space(c.level, load_catalogs(c));
  const auto encoder = make_encoder(c, space.size());
  if (static_cast<std::size_t>(ck.net.architecture().n_actions) != space.size() ||
      static_cast<std::size_t>(ck.net.architecture().input_dim) != encoder->dim())
    throw ConfigError("checkpoint network does not fit the rebuilt action space and encoder");

  auto backend = make_backend(c);
  Store store;
  ProgramSource source;
  std::string body;
  if (!program.empty()) {
    source = {program, {}, program};
    body = backend->lower_source(source);
  } else {
    const std::filesystem::path p(input);
    const auto ext = p.extension().string();
    source = {p.filename().string(), p, read_file(input)};
    body = (ext == ".c" || ext == ".cc" || ext == ".cpp" || ext == ".cxx") ? backend->lower_source(source) : source.text;
  }
  const IrId base = store.put_ir(IrArtifact::base(body));
  Environment env(*backend, c.policy, space, c.train.mu_max, store);
  const AgentState start = AgentState::base(base, source.id);
  const auto t = rollout(
      space, c.train.mu_max, start,
      [&](const AgentState& s) { return ck.net.q_values(encoder->encode(s, store.get_ir(s.ir))); },
      [&](const AgentState& s, int a) { return env.step(s, a).next; });

  std::cout << "sequence: " << (t.actions.empty() ? "(empty)" : format_sequence(t.actions)) << "\n";
  const std::string final_body = store.get_ir(t.final_state().ir);
  if (!output.empty()) {
    std::ofstream out(output);
    out << final_body;
  } else {
    std::cout << final_body;
    if (!final_body.empty() && final_body.back() != '\n') std::cout << "\n";
  }
  if (t.faulted) {
    std::cerr << "rollout stopped by a fault after " << t.actions.size() << " action(s): " << t.fault << "\n";
    return 1;
  }
  const double before = env.runtime_of(base, source.id);
  const double after = env.runtime_of(t.final_state().ir, source.id);
  std::cout << "speedup: " << format_ratio(before / after) << "\n";
  return 0;
}

int cmd_report(const std::string& log_path, const std::string& out_dir) {
  std::vector<LogRecord> records;
  try {
    records = read_run_log(log_path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (records.empty()) throw ConfigError("run log " + log_path + " is empty");
  const auto report = build_report(records);
  print_report(report, std::cout);
  if (!out_dir.empty()) write_report_files(report, out_dir);
  return 0;
}

int cmd_worker(const Globals& g, std::string manager, const std::string& id) {
  if (manager.empty())
    if (const char* env = std::getenv("QPASS_MANAGER")) manager = env;
  if (manager.empty()) throw ConfigError("--manager or QPASS_MANAGER is required");
  RunConfig c = resolve_config(g, false);
  auto backend = make_backend(c);
  WorkerOptions opts;
  if (!id.empty()) opts.worker_id = id;
  else opts.worker_id = "worker-" + std::to_string(::getpid());
  const auto& stop = install_stop_signals();
  const int n = worker_loop(Endpoint::parse(manager), *backend, opts, stop);
  std::cerr << opts.worker_id << ": completed " << n << " task(s)\n";
  return 0;
}

int cmd_store_verify(const Globals& g, std::string root) {
  if (root.empty()) root = resolve_config(g, true).store.string();
  if (root.empty()) throw ConfigError("no store root given");
  if (!std::filesystem::exists(root)) throw ConfigError("store " + root + " does not exist");
  Store store(root);
  const auto report = store.verify();
  std::cout << "checked " << report.checked << " artifact(s)\n";
  for (const auto& id : report.corrupt) std::cout << "corrupt\t" << id << "\n";
  for (const auto& id : report.missing) std::cout << "missing\t" << id << "\n";
  return report.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qpass: learn compiler pass orderings with deep Q-learning"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--seed", g.seed, "Override the training seed");
  app.add_option("--level", g.level, "Action space level")->check(CLI::IsMember({"H", "M", "L"}));
  app.add_option("--backend", g.backend, "Backend")->check(CLI::IsMember({"llvm", "synthetic"}));

  std::int64_t steps = -1;
  auto* train = app.add_subcommand("train", "Run exploration and training");
  train->add_option("--steps", steps, "Override total_steps");

  auto* evaluate = app.add_subcommand("evaluate", "Greedy evaluation of a stored run");

  std::string checkpoint, input, program, output;
  auto* optimize = app.add_subcommand("optimize", "Optimize one program with a trained agent");
  optimize->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  auto* in_opt = optimize->add_option("--input", input, "C/C++ source or IR file");
  auto* prog_opt = optimize->add_option("--program", program, "Generated synthetic program id");
  in_opt->excludes(prog_opt);
  optimize->add_option("--output", output, "Where to write the final IR (stdout if omitted)");

  std::string log_path, out_dir;
  auto* report = app.add_subcommand("report", "Summarize a run log");
  report->add_option("log", log_path, "run_log.jsonl")->required();
  report->add_option("--out", out_dir, "Directory for programs.tsv, series.csv and curves.svg");

  std::string manager, worker_id;
  auto* worker = app.add_subcommand("worker", "Serve tasks for a manager");
  worker->add_option("--manager", manager, "host:port (default: $QPASS_MANAGER)");
  worker->add_option("--id", worker_id, "Worker name");

  std::string store_root;
  auto* store = app.add_subcommand("store", "Store maintenance");
  store->require_subcommand(1);
  auto* verify = store->add_subcommand("verify", "Re-hash every stored IR artifact");
  verify->add_option("--root", store_root, "Store root (default: the config's store)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(g, steps);
    if (*evaluate) return cmd_evaluate(g);
    if (*optimize) {
      if (input.empty() && program.empty()) throw ConfigError("optimize needs --input or --program");
      return cmd_optimize(g, checkpoint, input, program, output);
    }
    if (*report) return cmd_report(log_path, out_dir);
    if (*worker) return cmd_worker(g, manager, worker_id);
    if (*verify) return cmd_store_verify(g, store_root);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
