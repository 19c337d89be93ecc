// proxsaga: solve, benchmark, speedup, verify and generate from the command line.
//
// Exit codes: 0 success, 1 property failure, 2 usage or input error, 3 solver error.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "proxsaga/proxsaga.hpp"

namespace {

using namespace proxsaga;
using nlohmann::json;

constexpr int exit_ok = 0;
constexpr int exit_property = 1;
constexpr int exit_usage = 2;
constexpr int exit_solver = 3;

/// Thrown for bad flag values discovered after CLI11 parsing.
struct UsageError : Error {
  using Error::Error;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

template <class T>
T parse_number(const std::string& text, const std::string& what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw UsageError("invalid " + what + ": '" + text + "'");
  }
  return value;
}

struct ProblemFlags {
  std::string data;
  std::string synthetic;
  std::string layout = "random";
  std::string loss = "logistic";
  std::string penalty = "l1";
  double box_lo = -1.0;
  double box_hi = 1.0;
  std::string lambda1 = "auto";
  std::string lambda2 = "auto-nnz=0.1";
  std::vector<std::string> blocks{"singleton"};
  bool drop_dead_blocks = false;
  std::string cache_dir;

  void add_to(CLI::App& app) {
    app.add_option("--data", data, "LibSVM file (.gz accepted)");
    app.add_option("--synthetic", synthetic, "Synthetic problem n,p,density,seed");
    app.add_option("--layout", layout, "Synthetic support layout")
        ->check(CLI::IsMember({"random", "cyclic"}));
    app.add_option("--loss", loss)->check(CLI::IsMember({"logistic", "squared"}));
    app.add_option("--penalty", penalty)->check(CLI::IsMember({"none", "l1", "group-l1", "box"}));
    app.add_option("--box-lo", box_lo, "Lower bound of the box penalty");
    app.add_option("--box-hi", box_hi, "Upper bound of the box penalty");
    app.add_option("--lambda1", lambda1, "l2 weight: FLOAT or auto (1/n)");
    app.add_option("--lambda2", lambda2, "Penalty weight: FLOAT or auto-nnz=F");
    app.add_option("--blocks", blocks, "singleton | single | file PATH")->expected(1, 2);
    app.add_flag("--drop-dead-blocks", drop_dead_blocks,
                 "Remove blocks no sample touches instead of failing");
    app.add_option("--cache-dir", cache_dir, "Optimum cache (default $PROXSAGA_CACHE_DIR)");
  }

  std::string cache() const { return cache_dir.empty() ? default_cache_dir() : cache_dir; }

  json to_json() const {
    return {{"data", data},         {"synthetic", synthetic}, {"layout", layout},
            {"loss", loss},         {"penalty", penalty},     {"box_lo", box_lo},
            {"box_hi", box_hi},     {"lambda1", lambda1},     {"lambda2", lambda2},
            {"blocks", blocks},     {"drop_dead_blocks", drop_dead_blocks}};
  }
};

struct BuiltProblem {
  std::optional<Problem> problem;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::optional<Regularization> search;
};

Dataset load_dataset(const ProblemFlags& f, LossKind loss) {
  if (f.data.empty() == f.synthetic.empty()) {
    throw UsageError("exactly one of --data and --synthetic is required");
  }
  if (!f.data.empty()) return load_libsvm(f.data);
  const auto parts = split(f.synthetic, ',');
  if (parts.size() != 4) throw UsageError("--synthetic expects n,p,density,seed");
  SyntheticSpec spec;
  spec.n = parse_number<std::size_t>(parts[0], "n");
  spec.p = parse_number<std::size_t>(parts[1], "p");
  spec.density = parse_number<double>(parts[2], "density");
  spec.seed = parse_number<std::uint64_t>(parts[3], "seed");
  spec.loss = loss;
  spec.layout = f.layout == "cyclic" ? SupportLayout::cyclic : SupportLayout::random;
  return gen_sparse_glm(spec).data;
}

BlockPartition load_blocks(const ProblemFlags& f, std::size_t p) {
  const std::string& kind = f.blocks.at(0);
  if (kind == "singleton" && f.blocks.size() == 1) return singleton_partition(p);
  if (kind == "single" && f.blocks.size() == 1) return single_block_partition(p);
  if (kind == "file" && f.blocks.size() == 2) {
    std::ifstream in(f.blocks[1]);
    if (!in) throw UsageError("cannot open block file " + f.blocks[1]);
    return read_partition(in, p);
  }
  throw UsageError("--blocks expects singleton, single or 'file PATH'");
}

BuiltProblem build_problem(const ProblemFlags& f) {
  const LossKind loss_kind = f.loss == "squared" ? LossKind::squared : LossKind::logistic;
  Dataset data = load_dataset(f, loss_kind);
  BlockPartition partition = load_blocks(f, data.n_features());

  BuiltProblem out;
  out.lambda1 = f.lambda1 == "auto" ? 1.0 / static_cast<double>(data.n_samples())
                                    : parse_number<double>(f.lambda1, "--lambda1");

  PenaltyKind kind = PenaltyKind::zero;
  if (f.penalty == "l1") kind = PenaltyKind::l1;
  if (f.penalty == "group-l1") kind = PenaltyKind::group_l2;
  if (f.penalty == "box") kind = PenaltyKind::box;

  const std::string auto_prefix = "auto-nnz=";
  if (f.lambda2.rfind(auto_prefix, 0) == 0) {
    if (kind == PenaltyKind::l1 || kind == PenaltyKind::group_l2) {
      const double target = parse_number<double>(f.lambda2.substr(auto_prefix.size()), "target");
      if (f.lambda1 != "auto") {
        throw UsageError("--lambda2 auto-nnz fixes lambda1 = 1/n; use --lambda1 auto");
      }
      out.search = gen_regularization(data, loss_kind, kind, partition, target);
      out.lambda2 = out.search->lambda2;
    }
  } else {
    out.lambda2 = parse_number<double>(f.lambda2, "--lambda2");
  }

  Penalty h = Penalty::none();
  if (kind == PenaltyKind::l1) h = Penalty::l1(out.lambda2);
  if (kind == PenaltyKind::group_l2) h = Penalty::group_l2(out.lambda2);
  if (kind == PenaltyKind::box) h = Penalty::box(f.box_lo, f.box_hi);

  out.problem.emplace(std::move(data), Loss{loss_kind, out.lambda1}, h, std::move(partition),
                      f.drop_dead_blocks ? DeadBlockPolicy::drop : DeadBlockPolicy::reject);
  return out;
}

json problem_json(const BuiltProblem& built) {
  const Problem& p = *built.problem;
  json j{{"hash", problem_hash(p)},
         {"n", p.n_samples()},
         {"p", p.dimension()},
         {"nnz", p.data().features.nnz()},
         {"L", p.smoothness().L},
         {"kappa", p.smoothness().kappa()},
         {"delta", p.index().delta},
         {"lambda1", built.lambda1},
         {"lambda2", built.lambda2},
         {"dropped_blocks", p.index().dropped_blocks}};
  if (built.search) j["lambda2_search"] = {{"nnz_fraction", built.search->nnz_fraction},
                                           {"solves", built.search->solves}};
  return j;
}

StepSize parse_step(const std::string& text) {
  if (text == "1/5L") return {StepRule::one_fifth_L, 0.0};
  if (text == "1/2L") return {StepRule::one_half_L, 0.0};
  if (text == "1/36L") return {StepRule::one_thirty_sixth_L, 0.0};
  const double gamma = parse_number<double>(text, "--step");
  if (!(gamma > 0.0)) throw UsageError("--step must be positive");
  return StepSize::fixed(gamma);
}

struct RunFlags {
  std::string step = "1/5L";
  std::size_t epochs = 100;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;
  std::size_t max_threads = 256;

  void add_to(CLI::App& app, bool with_threads) {
    app.add_option("--step", step, "FLOAT | 1/5L | 1/2L | 1/36L");
    app.add_option("--epochs", epochs);
    if (with_threads) app.add_option("--threads", threads);
    app.add_option("--seed", seed);
    app.add_option("--checkpoint-every", checkpoint_every, "Iterations; 0 means one epoch");
    app.add_option("--max-threads", max_threads, "Hardware cap on worker threads");
  }

  AsyncConfig config() const {
    if (threads == 0) throw UsageError("--threads must be at least 1");
    if (threads > max_threads) throw UsageError("--threads exceeds --max-threads");
    if (epochs == 0) throw UsageError("--epochs must be at least 1");
    AsyncConfig c;
    c.step = parse_step(step);
    c.epochs = epochs;
    c.seed = seed;
    c.checkpoint_every = checkpoint_every;
    c.threads = threads;
    c.max_threads = max_threads;
    return c;
  }

  json to_json() const {
    return {{"step", step},   {"epochs", epochs},
            {"threads", threads}, {"seed", seed},
            {"checkpoint_every", checkpoint_every}};
  }
};

std::string sidecar_path(const std::string& trace_path) { return trace_path + ".json"; }

void write_json(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

json argv_json(int argc, char** argv) {
  json a = json::array();
  for (int k = 0; k < argc; ++k) a.push_back(argv[k]);
  return a;
}

Trace run_solver(const Problem& problem, const AsyncConfig& config) {
  if (config.threads == 1) return run_sequential(problem, config);
  return run_async(problem, config);
}

int cmd_solve(const ProblemFlags& pf, const RunFlags& rf, const std::string& trace_out,
              bool report_subopt, const json& argv) {
  const AsyncConfig config = rf.config();
  const BuiltProblem built = build_problem(pf);
  const Problem& problem = *built.problem;

  const Trace trace = run_solver(problem, config);
  const Checkpoint& last = trace.checkpoints.back();
  std::cout << "solver " << trace.solver << "  threads " << trace.threads << "  step "
            << trace.step_size << "\n"
            << "iterations " << last.counter_iterations << "  epochs " << last.epochs
            << "  objective " << std::setprecision(17) << last.objective << "\n";

  json result{{"solver", trace.solver},
              {"step_size", trace.step_size},
              {"iterations", last.counter_iterations},
              {"final_objective", last.objective},
              {"final_x", trace.final_x}};
  if (report_subopt) {
    OptimumOptions opt;
    opt.cache_dir = pf.cache();
    const Optimum optimum = compute_optimum(problem, opt);
    const auto gaps = suboptimality(trace, optimum.objective);
    std::cout << "suboptimality " << gaps.back() << "  (optimum " << optimum.objective
              << (optimum.from_cache ? ", cached" : "") << ")\n";
    result["optimum_objective"] = optimum.objective;
    result["suboptimality"] = gaps.back();
  }

  if (!trace_out.empty()) {
    std::ofstream csv(trace_out);
    if (!csv) throw Error("cannot write " + trace_out);
    write_trace_csv(csv, trace, config.threads > 1);
    write_json(sidecar_path(trace_out), {{"command", "solve"},
                                         {"argv", argv},
                                         {"problem_flags", pf.to_json()},
                                         {"run", rf.to_json()},
                                         {"problem", problem_json(built)},
                                         {"result", result}});
  }
  return exit_ok;
}

int cmd_benchmark(const ProblemFlags& pf, const RunFlags& rf, std::size_t fista_iterations,
                  const std::string& out_dir, const json& argv) {
  const AsyncConfig config = rf.config();
  const BuiltProblem built = build_problem(pf);
  const Problem& problem = *built.problem;
  OptimumOptions opt;
  opt.cache_dir = pf.cache();
  const Optimum optimum = compute_optimum(problem, opt);

  FistaConfig fista;
  fista.iterations = fista_iterations;
  std::vector<Trace> traces{run_sequential(problem, config), run_dense_saga(problem, config),
                            run_fista(problem, fista)};
  if (config.threads > 1) traces.push_back(run_async(problem, config));

  std::filesystem::create_directories(out_dir);
  json summary = json::array();
  std::cout << "solver,threads,final_suboptimality,wall_seconds\n";
  for (const Trace& t : traces) {
    const auto gaps = suboptimality(t, optimum.objective);
    const std::string name = t.solver + (t.threads > 1 ? "_" + std::to_string(t.threads) : "");
    std::ofstream csv(out_dir + "/" + name + ".csv");
    write_trace_csv(csv, t, t.solver == "prox_asaga");
    std::cout << name << ',' << t.threads << ',' << gaps.back() << ','
              << t.checkpoints.back().wall_seconds << '\n';
    summary.push_back({{"solver", name},
                       {"final_suboptimality", gaps.back()},
                       {"wall_seconds", t.checkpoints.back().wall_seconds}});
  }
  write_json(out_dir + "/benchmark.json", {{"command", "benchmark"},
                                           {"argv", argv},
                                           {"problem_flags", pf.to_json()},
                                           {"run", rf.to_json()},
                                           {"fista_iterations", fista_iterations},
                                           {"problem", problem_json(built)},
                                           {"optimum_objective", optimum.objective},
                                           {"solvers", summary}});
  return exit_ok;
}

int cmd_speedup(const ProblemFlags& pf, const RunFlags& rf, const std::string& cores_text,
                double target, const std::string& out, const json& argv) {
  std::vector<std::size_t> cores;
  for (const auto& c : split(cores_text, ',')) cores.push_back(parse_number<std::size_t>(c, "core count"));
  if (cores.empty() || cores.front() != 1) throw UsageError("--cores must start with 1");
  for (std::size_t k = 1; k < cores.size(); ++k) {
    if (cores[k] <= cores[k - 1]) throw UsageError("--cores must be strictly ascending");
  }
  if (cores.back() > rf.max_threads) throw UsageError("--cores exceeds --max-threads");
  if (!(target > 0.0)) throw UsageError("--target must be positive");
  AsyncConfig config = rf.config();

  const BuiltProblem built = build_problem(pf);
  const Problem& problem = *built.problem;
  OptimumOptions opt;
  opt.cache_dir = pf.cache();
  const Optimum optimum = compute_optimum(problem, opt);
  const SpeedupReport report = measure_speedup(problem, config, cores, optimum.objective, target);

  std::cout << "# delta " << report.delta << "\n# L " << report.L << "\n# kappa " << report.kappa
            << "\n";
  write_speedup_csv(std::cout, report);
  if (!out.empty()) {
    std::ofstream csv(out);
    if (!csv) throw Error("cannot write " + out);
    write_speedup_csv(csv, report);
    json rows = json::array();
    for (const auto& r : report.rows) {
      rows.push_back({{"cores", r.cores},
                      {"reached", r.reached},
                      {"iterations", r.iterations},
                      {"seconds", r.seconds},
                      {"theoretical_speedup", r.theoretical_speedup},
                      {"wall_speedup", r.wall_speedup}});
    }
    write_json(sidecar_path(out), {{"command", "speedup"},
                                   {"argv", argv},
                                   {"problem_flags", pf.to_json()},
                                   {"run", rf.to_json()},
                                   {"cores", cores},
                                   {"target", target},
                                   {"problem", problem_json(built)},
                                   {"optimum_objective", optimum.objective},
                                   {"rows", rows}});
  }
  return exit_ok;
}

int cmd_verify(const std::vector<std::string>& only, const std::string& cache_dir,
               const std::string& report_path) {
  VerifyOptions options;
  for (const auto& item : only) {
    for (const auto& g : split(item, ',')) options.only.push_back(g);
  }
  options.cache_dir = cache_dir.empty() ? default_cache_dir() : cache_dir;
  const VerifyReport report = run_verify(options);
  for (const auto& r : report.results) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.group << ": " << r.name << "  (observed "
              << r.observed << ", threshold " << r.threshold << ")\n";
  }
  std::cout << (report.pass() ? "all properties hold" : "property failure") << " in "
            << report.seconds << " s\n";
  if (!report_path.empty()) write_json(report_path, report.to_json());
  return report.pass() ? exit_ok : exit_property;
}

int cmd_generate(const std::string& synthetic, const std::string& loss, const std::string& layout,
                 const std::string& out) {
  ProblemFlags f;
  f.synthetic = synthetic;
  f.layout = layout;
  const Dataset data = load_dataset(f, loss == "squared" ? LossKind::squared : LossKind::logistic);
  save_libsvm(out, data);
  std::cout << "wrote " << data.n_samples() << " x " << data.n_features() << " ("
            << data.features.nnz() << " nonzeros) to " << out << "\n";
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse Proximal SAGA and its asynchronous variant"};
  app.require_subcommand(1);
  const json args = argv_json(argc, argv);

  ProblemFlags solve_pf;
  RunFlags solve_rf;
  std::string trace_out;
  bool report_subopt = false;
  auto* solve = app.add_subcommand("solve", "Run one solver and write its trace");
  solve_pf.add_to(*solve);
  solve_rf.add_to(*solve, true);
  solve->add_option("--trace-out", trace_out, "Trace CSV; a JSON sidecar goes to PATH.json");
  solve->add_flag("--suboptimality", report_subopt, "Report suboptimality against the cached optimum");

  ProblemFlags bench_pf;
  RunFlags bench_rf;
  std::size_t fista_iterations = 1000;
  std::string bench_out = "benchmark";
  auto* bench = app.add_subcommand("benchmark", "Run every solver on one problem");
  bench_pf.add_to(*bench);
  bench_rf.add_to(*bench, true);
  bench->add_option("--fista-iterations", fista_iterations);
  bench->add_option("--out-dir", bench_out);

  ProblemFlags speed_pf;
  RunFlags speed_rf;
  std::string cores = "1";
  double target = 1e-10;
  std::string speed_out;
  auto* speed = app.add_subcommand("speedup", "Iteration and wall-clock speedup per core count");
  speed_pf.add_to(*speed);
  speed_rf.add_to(*speed, false);
  speed->add_option("--cores", cores, "Comma-separated core counts starting with 1");
  speed->add_option("--target", target, "Suboptimality to reach");
  speed->add_option("--out", speed_out, "Speedup CSV; a JSON sidecar goes to PATH.json");

  std::vector<std::string> only;
  std::string verify_cache;
  std::string verify_report;
  auto* verify = app.add_subcommand("verify", "Run the property suite");
  verify->add_option("--only", only, "Property groups to run")->delimiter(',');
  verify->add_option("--cache-dir", verify_cache);
  verify->add_option("--report", verify_report, "JSON report path");

  std::string gen_synthetic;
  std::string gen_loss = "logistic";
  std::string gen_layout = "random";
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Write a synthetic problem as LibSVM");
  gen->add_option("--synthetic", gen_synthetic, "n,p,density,seed")->required();
  gen->add_option("--loss", gen_loss)->check(CLI::IsMember({"logistic", "squared"}));
  gen->add_option("--layout", gen_layout)->check(CLI::IsMember({"random", "cyclic"}));
  gen->add_option("--out", gen_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  // Input problems are usage errors (2); failures once a solver is running are 3.
  try {
    if (*solve) return cmd_solve(solve_pf, solve_rf, trace_out, report_subopt, args);
    if (*bench) return cmd_benchmark(bench_pf, bench_rf, fista_iterations, bench_out, args);
    if (*speed) return cmd_speedup(speed_pf, speed_rf, cores, target, speed_out, args);
    if (*verify) return cmd_verify(only, verify_cache, verify_report);
    if (*gen) return cmd_generate(gen_synthetic, gen_loss, gen_layout, gen_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return exit_solver;
  }
  return exit_usage;
}
