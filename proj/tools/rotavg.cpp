// rotavg: command-line front end for the solvers, generators and file
// formats. Exit codes: 0 success, 1 solver or data error, 2 usage error,
// 3 solution not certified.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rotavg/connectivity.hpp"
#include "rotavg/cycle.hpp"
#include "rotavg/io.hpp"
#include "rotavg/primal_dual.hpp"
#include "rotavg/synth.hpp"

namespace fs = std::filesystem;
using namespace rotavg;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;
constexpr int kUncertified = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(item);
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("bad " + what + " '" + s + "'");
}

long long to_integer(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("bad " + what + " '" + s + "'");
}

CycleSpec parse_cycle_spec(const std::string& s) {
  const auto f = split_commas(s);
  if (f.size() != 3) throw UsageError("cycle spec must be n,sigma,seed");
  return {static_cast<Index>(to_integer(f[0], "n")), to_double(f[1], "sigma"),
          static_cast<std::uint64_t>(to_integer(f[2], "seed"))};
}

GraphSpec parse_graph_spec(const std::string& s) {
  const auto f = split_commas(s);
  if (f.size() != 4) throw UsageError("graph spec must be n,p,sigma,seed");
  return {static_cast<Index>(to_integer(f[0], "n")), to_double(f[1], "edge probability"),
          static_cast<std::uint64_t>(to_integer(f[3], "seed")), to_double(f[2], "sigma")};
}

void print_bench(std::ostream& out, const BenchRow& row) {
  write_bench_header(out);
  write_bench_row(out, row);
}

// ---------------------------------------------------------------- solve

struct SolveArgs {
  std::string input;
  int max_iter = 100;
  double eps = 1e-15;
  bool relative_eps = false;
  std::string trace, out, report;
};

int run_solve(const SolveArgs& a) {
  const Dataset d = parse_g2o(a.input);
  SolverConfig cfg;
  cfg.max_iterations = a.max_iter;
  cfg.epsilon = a.eps;
  cfg.relative_epsilon = a.relative_eps;
  const SolveReport r = solve(d.graph, cfg);
  const BenchRow row = bench_row(d.name, d.graph, r);

  if (!a.trace.empty()) {
    std::ofstream t = io_detail::open_output(a.trace);
    write_trace_csv(t, r.trace);
  }
  if (!a.out.empty()) write_solution(a.out, r.rotations);
  if (!a.report.empty()) {
    std::ofstream j = io_detail::open_output(a.report);
    j << to_json(row, &r).dump(2) << '\n';
  }
  print_bench(std::cout, row);
  if (d.dropped_duplicate_edges > 0) {
    std::cerr << "note: dropped " << d.dropped_duplicate_edges << " duplicate edges\n";
  }
  if (d.ignored_lines > 0) {
    std::cerr << "warning: ignored " << d.ignored_lines << " lines with unrecognized tags\n";
  }
  return r.certified ? kOk : kUncertified;
}

// ---------------------------------------------------------------- cycle

struct CycleArgs {
  std::string input;
  std::string synth;
  int k = 0;
  std::string out;
};

int run_cycle(const CycleArgs& a) {
  if (a.input.empty() == a.synth.empty()) {
    throw UsageError("cycle needs exactly one of <g2o> or --synth n,sigma,seed");
  }
  std::optional<GraphCycle> from_file;
  std::optional<CycleProblem> problem;
  if (!a.synth.empty()) {
    problem = generate_cycle(parse_cycle_spec(a.synth)).problem;
  } else {
    from_file = cycle_from_graph(parse_g2o(a.input).graph);
    problem = from_file->problem;
  }
  const CycleSolution s = stationary_point(*problem, a.k);
  const BlockVector rotations =
      from_file ? in_graph_order(s.rotations, from_file->order) : s.rotations;
  if (!a.out.empty()) write_solution(a.out, rotations);

  std::cout << "n,k,gamma,cost,is_global\n"
            << problem->size() << ',' << s.root_index << ',' << format_double(s.gamma) << ','
            << format_double(s.cost) << ',' << (s.is_global ? "true" : "false") << '\n';
  return kOk;
}

// ---------------------------------------------------------------- certify

struct CertifyArgs {
  std::string input, solution;
  double tol = 1e-8;
};

int run_certify(const CertifyArgs& a) {
  const Dataset d = parse_g2o(a.input);
  const BlockVector r = read_solution(a.solution);
  if (r.size() != d.graph.node_count()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "solution has " + std::to_string(r.size()) + " rotations, graph has " +
                    std::to_string(d.graph.node_count()) + " nodes");
  }
  const BlockDiagonal lambda = kkt_multiplier(d.graph, r);
  const Certificate c = certify(build_pairwise_matrix(d.graph), r, lambda, a.tol);
  std::cout << "min_eig,stationarity_residual,cost,certified\n"
            << format_double(c.min_eigenvalue) << ',' << format_double(c.stationarity_residual)
            << ',' << format_double(cost(d.graph, r)) << ',' << (c.certified ? "true" : "false")
            << '\n';
  return c.certified ? kOk : kUncertified;
}

// ---------------------------------------------------------------- spectrum

int run_spectrum(const std::string& synth, bool verify) {
  const CycleProblem p = generate_cycle(parse_cycle_spec(synth)).problem;
  const std::vector<double> values = closed_form_spectrum(p);
  for (double v : values) std::cout << format_double(v) << '\n';
  if (!verify) return kOk;

  if (3 * p.size() > 600) {
    throw Error(ErrorCode::kInvalidArgument, "--verify is limited to 3n <= 600");
  }
  const Eigen::MatrixXd dense = build_pairwise_matrix(to_graph(p)).dense();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense, Eigen::EigenvaluesOnly);
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    worst = std::max(worst, std::abs(values[i] - es.eigenvalues()[static_cast<Index>(i)]));
  }
  const bool ok = worst <= 1e-9;
  std::cerr << "dense check: max deviation " << format_double(worst) << (ok ? " (ok)" : " (FAILED)")
            << '\n';
  return ok ? kOk : kFailure;
}

// ---------------------------------------------------------------- synth

fs::path truth_path(const fs::path& g2o) {
  fs::path p = g2o;
  p.replace_extension(".truth.txt");
  return p;
}

int run_synth_cycle(const std::string& spec, const std::string& out) {
  const SynthCycle c = generate_cycle(parse_cycle_spec(spec));
  std::ofstream g = io_detail::open_output(out);
  write_g2o(g, to_graph(c.problem), &c.ground_truth);
  write_solution(truth_path(out).string(), c.ground_truth);
  std::cerr << "wrote " << out << " and " << truth_path(out).string() << '\n';
  return kOk;
}

int run_synth_graph(const std::string& spec, const std::string& out) {
  const SynthGraph s = generate_graph(parse_graph_spec(spec));
  std::ofstream g = io_detail::open_output(out);
  write_g2o(g, s.graph, &s.ground_truth);
  write_solution(truth_path(out).string(), s.ground_truth);
  std::cerr << "wrote " << out << " and " << truth_path(out).string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------- experiment

struct ExperimentArgs {
  Index n = 50;
  std::string sigmas;
  int trials = 300;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

int run_principal_angle(const ExperimentArgs& a) {
  std::vector<double> sigmas;
  for (const auto& s : split_commas(a.sigmas)) sigmas.push_back(to_double(s, "sigma"));
  if (sigmas.empty()) throw UsageError("no sigmas given");
  const PrincipalAngleStudy study = principal_angle_experiment(a.n, sigmas, a.trials, a.seed);

  fs::create_directories(a.out_dir);
  {
    std::ofstream out = io_detail::open_output((fs::path(a.out_dir) / "trials.csv").string());
    out << "trial,n,sigma,fiedler,cosine\n";
    for (const auto& t : study.trials) {
      out << t.trial << ',' << t.n << ',' << format_double(t.sigma) << ','
          << format_double(t.fiedler) << ',' << format_double(t.cosine) << '\n';
    }
  }
  std::ostringstream summary;
  summary << "fiedler_bin,sigma,mean_cosine,count\n";
  for (const auto& b : study.bins) {
    summary << fiedler_bin_label(b.bin) << ',' << format_double(b.sigma) << ','
            << format_double(b.mean_cosine) << ',' << b.count << '\n';
  }
  {
    std::ofstream out = io_detail::open_output((fs::path(a.out_dir) / "summary.csv").string());
    out << summary.str();
  }
  {
    const nlohmann::json meta = {{"rng", CounterRng::kAlgorithm},
                                 {"seed", a.seed},
                                 {"n", a.n},
                                 {"sigmas", sigmas},
                                 {"trials", a.trials},
                                 {"failed_trials", study.failed_trials}};
    std::ofstream out = io_detail::open_output((fs::path(a.out_dir) / "meta.json").string());
    out << meta.dump(2) << '\n';
  }
  std::cout << summary.str();
  return kOk;
}

// ---------------------------------------------------------------- bench

int run_bench(const std::string& dir, const std::string& report) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".g2o") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::kIo, "no .g2o files in '" + dir + "'");

  std::ostringstream table;
  write_bench_header(table);
  int status = kOk;
  for (const fs::path& file : files) {
    try {
      const Dataset d = parse_g2o(file.string());
      const SolveReport r = solve(d.graph);
      write_bench_row(table, bench_row(d.name, d.graph, r));
      if (!r.certified && status == kOk) status = kUncertified;
    } catch (const Error& e) {
      std::cerr << file.string() << ": " << e.what() << '\n';
      status = kFailure;
    }
  }
  std::cout << table.str();
  if (!report.empty()) {
    std::ofstream out = io_detail::open_output(report);
    out << table.str();
  }
  return status;
}

// ---------------------------------------------------------------- plot

int run_plot(const std::string& trace, const std::string& out) {
  std::ifstream in = io_detail::open_input(trace);
  const std::vector<TraceRow> rows = read_trace_csv(in);
  std::ofstream svg = io_detail::open_output(out);
  svg << convergence_svg(rows);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotation averaging: primal-dual solver, closed-form cycles, certificates"};
  app.require_subcommand(1);

  SolveArgs solve_args;
  auto* solve_cmd = app.add_subcommand("solve", "Run the primal-dual solver on a g2o file");
  solve_cmd->add_option("g2o", solve_args.input, "Input pose graph")->required();
  solve_cmd->add_option("--max-iter", solve_args.max_iter, "Iteration limit")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--eps", solve_args.eps, "Stop when min |lambda| falls below this")
      ->check(CLI::PositiveNumber);
  solve_cmd->add_flag("--relative-eps", solve_args.relative_eps, "Scale --eps by ||Lambda - R~||_inf");
  solve_cmd->add_option("--trace", solve_args.trace, "Per-iteration CSV trace");
  solve_cmd->add_option("--out", solve_args.out, "Solution file");
  solve_cmd->add_option("--report", solve_args.report, "JSON report");

  CycleArgs cycle_args;
  auto* cycle_cmd = app.add_subcommand("cycle", "Closed-form solution of a cycle graph");
  cycle_cmd->add_option("g2o", cycle_args.input, "Input cycle graph");
  cycle_cmd->add_option("--synth", cycle_args.synth, "Synthetic cycle n,sigma,seed");
  cycle_cmd->add_option("--k", cycle_args.k, "Stationary point index (0 = global optimum)");
  cycle_cmd->add_option("--out", cycle_args.out, "Solution file");

  CertifyArgs certify_args;
  auto* certify_cmd = app.add_subcommand("certify", "Certify an externally supplied solution");
  certify_cmd->add_option("g2o", certify_args.input, "Input pose graph")->required();
  certify_cmd->add_option("solution", certify_args.solution, "Solution file")->required();
  certify_cmd->add_option("--tol", certify_args.tol, "Certificate tolerance")->check(CLI::PositiveNumber);

  std::string spectrum_synth;
  bool spectrum_verify = false;
  auto* spectrum_cmd = app.add_subcommand("spectrum", "Closed-form spectrum of a cycle's R~");
  spectrum_cmd->add_option("--synth", spectrum_synth, "Synthetic cycle n,sigma,seed")->required();
  spectrum_cmd->add_flag("--verify", spectrum_verify, "Cross-check against a dense eigensolver");

  std::string synth_spec, synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic problem and its ground truth");
  synth_cmd->require_subcommand(1);
  auto* synth_cycle = synth_cmd->add_subcommand("cycle", "Noisy cycle around a circle");
  synth_cycle->add_option("spec", synth_spec, "n,sigma,seed")->required();
  synth_cycle->add_option("out", synth_out, "Output g2o file")->required();
  auto* synth_graph = synth_cmd->add_subcommand("graph", "Connected Erdos-Renyi graph");
  synth_graph->add_option("spec", synth_spec, "n,p,sigma,seed")->required();
  synth_graph->add_option("out", synth_out, "Output g2o file")->required();

  ExperimentArgs experiment_args;
  auto* experiment_cmd = app.add_subcommand("experiment", "Reproduction experiments");
  experiment_cmd->require_subcommand(1);
  auto* angle_cmd = experiment_cmd->add_subcommand(
      "principal-angle", "Noisy vs noise-free bottom eigenspaces, binned by Fiedler value");
  angle_cmd->add_option("n", experiment_args.n, "Nodes per graph")->required()->check(CLI::Range(3, 100000));
  angle_cmd->add_option("sigmas", experiment_args.sigmas, "Comma-separated noise levels")->required();
  angle_cmd->add_option("trials", experiment_args.trials, "Trials")->required()->check(CLI::PositiveNumber);
  angle_cmd->add_option("seed", experiment_args.seed, "Seed")->required();
  angle_cmd->add_option("--out-dir", experiment_args.out_dir, "Directory for CSV and metadata");

  std::string bench_dir, bench_report;
  auto* bench_cmd = app.add_subcommand("bench", "Solve every .g2o file in a directory");
  bench_cmd->add_option("dir", bench_dir, "Dataset directory")->required();
  bench_cmd->add_option("--report", bench_report, "CSV report");

  std::string plot_trace, plot_out;
  auto* plot_cmd = app.add_subcommand("plot", "SVG convergence plot from a trace CSV");
  plot_cmd->add_option("trace", plot_trace, "Trace CSV")->required();
  plot_cmd->add_option("out", plot_out, "Output SVG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (solve_cmd->parsed()) return run_solve(solve_args);
    if (cycle_cmd->parsed()) return run_cycle(cycle_args);
    if (certify_cmd->parsed()) return run_certify(certify_args);
    if (spectrum_cmd->parsed()) return run_spectrum(spectrum_synth, spectrum_verify);
    if (synth_cycle->parsed()) return run_synth_cycle(synth_spec, synth_out);
    if (synth_graph->parsed()) return run_synth_graph(synth_spec, synth_out);
    if (angle_cmd->parsed()) return run_principal_angle(experiment_args);
    if (bench_cmd->parsed()) return run_bench(bench_dir, bench_report);
    if (plot_cmd->parsed()) return run_plot(plot_trace, plot_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  std::cerr << app.help();
  return kUsage;
}
