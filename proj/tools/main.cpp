#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "couplings/instance_io.hpp"
#include "couplings/oracles.hpp"
#include "couplings/osborne.hpp"
#include "couplings/sinkhorn.hpp"

namespace fs = std::filesystem;
using namespace couplings;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitBudget = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  out << body;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Resolves --input / --gen into an instance of the kind the command needs.
// CSV input carries only the cost matrix; ot/scale then use uniform marginals.
ProblemInstance load_instance(const std::string& input, const std::string& gen,
                              ProblemKind kind) {
  if (input.empty() == gen.empty()) {
    throw std::invalid_argument("exactly one of --input and --gen is required");
  }
  if (!gen.empty()) return parse_generator_spec(gen, kind);
  if (ends_with(input, ".csv")) {
    CostMatrix cost(parse_csv_matrix(read_file(input)));
    ProblemInstance inst{kind, std::move(cost), std::nullopt, std::nullopt, {}};
    if (kind == ProblemKind::ot || kind == ProblemKind::scale) {
      inst.mu = Distribution::uniform(inst.cost.size());
      inst.nu = Distribution::uniform(inst.cost.size());
    }
    return inst;
  }
  ProblemInstance inst = parse_instance(read_file(input));
  if (inst.kind != kind) {
    throw std::invalid_argument("instance kind '" + to_string(inst.kind) +
                                "' does not match this command (expected '" +
                                to_string(kind) + "')");
  }
  return inst;
}

void emit_report(const ReportDocument& doc, const std::string& out_path) {
  const std::string body = write_report(doc);
  if (out_path.empty()) std::cout << body;
  else write_file(out_path, body);
}

struct StrategyChoice {
  CoordinateStrategy strategy = CoordinateStrategy::greedy;
  std::uint64_t seed = 0;
};

StrategyChoice parse_strategy(const std::string& s) {
  if (s == "cyclic") return {CoordinateStrategy::cyclic, 0};
  if (s == "greedy") return {CoordinateStrategy::greedy, 0};
  if (s.rfind("random:", 0) == 0) {
    const std::string seed_str = s.substr(7);
    size_t consumed = 0;
    unsigned long long seed = 0;
    try {
      seed = std::stoull(seed_str, &consumed);
    } catch (const std::exception&) {
      throw std::invalid_argument("--strategy random:SEED needs an integer seed");
    }
    if (consumed != seed_str.size()) {
      throw std::invalid_argument("--strategy random:SEED needs an integer seed");
    }
    return {CoordinateStrategy::random, static_cast<std::uint64_t>(seed)};
  }
  throw std::invalid_argument("--strategy must be cyclic, greedy, or random:SEED");
}

std::vector<long> parse_long_list(const std::string& s, const char* flag) {
  std::vector<long> out;
  std::istringstream parts(s);
  std::string part;
  while (std::getline(parts, part, ',')) {
    size_t consumed = 0;
    long v = 0;
    try {
      v = std::stol(part, &consumed);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string(flag) + ": not an integer: '" + part + "'");
    }
    if (consumed != part.size() || v < 0) {
      throw std::invalid_argument(std::string(flag) + ": not a valid entry: '" + part + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument(std::string(flag) + ": empty list");
  return out;
}

int run_ot(const std::string& input, const std::string& gen, double epsilon,
           const std::string& out, const std::string& trace, bool verify) {
  const ProblemInstance inst = load_instance(input, gen, ProblemKind::ot);
  ReportDocument doc;
  doc.kind = ProblemKind::ot;
  doc.report = solve_ot(inst.cost, *inst.mu, *inst.nu, epsilon);
  if (verify) {
    if (inst.cost.size() > 64) {
      throw std::invalid_argument("--verify supports n <= 64 for ot");
    }
    if (!marginals_representable(*inst.mu, *inst.nu)) {
      throw std::invalid_argument(
          "--verify requires marginals representable over a denominator <= 512");
    }
    doc.oracle_value = exact_ot(inst.cost, *inst.mu, *inst.nu).value;
    doc.abs_gap = std::abs(doc.report.value - *doc.oracle_value);
  }
  if (!trace.empty()) write_file(trace, write_trace_csv(doc.report, /*include_kl=*/true));
  emit_report(doc, out);
  return doc.report.converged ? kExitOk : kExitBudget;
}

int run_mmc(const std::string& input, const std::string& gen, double epsilon,
            const std::string& out, const std::string& trace, bool verify,
            const std::string& strategy) {
  const ProblemInstance inst = load_instance(input, gen, ProblemKind::mmc);
  const StrategyChoice choice = parse_strategy(strategy);
  ReportDocument doc;
  doc.kind = ProblemKind::mmc;
  doc.report = solve_mmc(inst.cost, epsilon, choice.strategy, choice.seed);
  if (verify) {
    if (inst.cost.size() > 512) {
      throw std::invalid_argument("--verify supports n <= 512 for mmc");
    }
    doc.oracle_value = karp_mmc(inst.cost).value;
    doc.abs_gap = std::abs(doc.report.value - *doc.oracle_value);
  }
  if (!trace.empty()) write_file(trace, write_trace_csv(doc.report, /*include_kl=*/false));
  emit_report(doc, out);
  return doc.report.converged ? kExitOk : kExitBudget;
}

int run_scale(const std::string& input, const std::string& gen, double eta, double tol,
              const std::string& out, const std::string& trace) {
  const ProblemInstance inst = load_instance(input, gen, ProblemKind::scale);
  SinkhornConfig cfg;
  cfg.eta = eta;
  cfg.marginal_tolerance = tol;
  auto [m, report] = run_sinkhorn(inst.cost, *inst.mu, *inst.nu, cfg);
  ReportDocument doc;
  doc.kind = ProblemKind::scale;
  doc.report = std::move(report);
  doc.potentials_x = m.x();
  doc.potentials_y = m.y_vector();
  doc.final_marginal_error = doc.report.trace.back().imbalance;
  if (m.size() <= 64) doc.report.certificate = Coupling(materialize(m));
  if (!trace.empty()) write_file(trace, write_trace_csv(doc.report, /*include_kl=*/true));
  emit_report(doc, out);
  return doc.report.converged ? kExitOk : kExitBudget;
}

int run_balance(const std::string& input, const std::string& gen, double eta, double tol,
                const std::string& out, const std::string& trace,
                const std::string& strategy) {
  const ProblemInstance inst = load_instance(input, gen, ProblemKind::balance);
  const StrategyChoice choice = parse_strategy(strategy);
  OsborneConfig cfg;
  cfg.eta = eta;
  cfg.imbalance_tolerance = tol;
  cfg.max_updates = 200000;
  cfg.strategy = choice.strategy;
  cfg.seed = choice.seed;
  auto [m, report] = run_osborne(inst.cost, cfg);
  ReportDocument doc;
  doc.kind = ProblemKind::balance;
  doc.report = std::move(report);
  doc.potentials_x = m.x();
  doc.final_imbalance = doc.report.trace.back().imbalance;
  if (m.size() <= 64) {
    // balancing iterates are unnormalized; report the normalized matrix
    Matrix p = materialize(m);
    const double mass = p.total();
    for (int i = 0; i < p.size(); ++i)
      for (int j = 0; j < p.size(); ++j) p(i, j) /= mass;
    doc.report.certificate = Coupling(std::move(p));
  }
  if (!trace.empty()) write_file(trace, write_trace_csv(doc.report, /*include_kl=*/false));
  emit_report(doc, out);
  return doc.report.converged ? kExitOk : kExitBudget;
}

struct BenchCell {
  long n = 0;
  long seed = 0;
  std::string report_path;
  std::string value;
  std::string gap;  // empty when the oracle is out of reach
  long iterations = 0;
  bool converged = false;
  double wall_ms = 0.0;
};

int run_bench(const std::string& suite, const std::string& sizes, const std::string& seeds,
              const std::string& out_dir, double epsilon, int jobs) {
  if (suite != "uniform-ot" && suite != "euclidean-ot" && suite != "uniform-mmc") {
    throw std::invalid_argument("unknown suite '" + suite +
                                "' (expected uniform-ot, euclidean-ot, or uniform-mmc)");
  }
  const std::vector<long> size_list = parse_long_list(sizes, "--sizes");
  const std::vector<long> seed_list = parse_long_list(seeds, "--seeds");
  fs::create_directories(out_dir);

  std::vector<BenchCell> cells;
  for (long n : size_list)
    for (long seed : seed_list) {
      BenchCell cell;
      cell.n = n;
      cell.seed = seed;
      cell.report_path = (fs::path(out_dir) / (suite + "-n" + std::to_string(n) + "-s" +
                                               std::to_string(seed) + ".json"))
                             .string();
      cells.push_back(std::move(cell));
    }

  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;

  const auto worker = [&] {
    while (true) {
      const size_t idx = next.fetch_add(1);
      if (idx >= cells.size() || failed.load()) break;
      BenchCell& cell = cells[idx];
      try {
        const auto start = std::chrono::steady_clock::now();
        ReportDocument doc;
        if (suite == "uniform-mmc") {
          const ProblemInstance inst =
              gen_uniform_cost(ProblemKind::mmc, static_cast<int>(cell.n),
                               static_cast<std::uint64_t>(cell.seed));
          doc.kind = ProblemKind::mmc;
          doc.report = solve_mmc(inst.cost, epsilon);
          if (cell.n <= 512) {
            doc.oracle_value = karp_mmc(inst.cost).value;
            doc.abs_gap = std::abs(doc.report.value - *doc.oracle_value);
          }
        } else {
          const ProblemInstance inst =
              suite == "uniform-ot"
                  ? gen_uniform_cost(ProblemKind::ot, static_cast<int>(cell.n),
                                     static_cast<std::uint64_t>(cell.seed))
                  : gen_euclidean_ot(static_cast<int>(cell.n), 2, 2.0,
                                     static_cast<std::uint64_t>(cell.seed));
          doc.kind = ProblemKind::ot;
          doc.report = solve_ot(inst.cost, *inst.mu, *inst.nu, epsilon);
          if (cell.n <= 64 && marginals_representable(*inst.mu, *inst.nu)) {
            doc.oracle_value = exact_ot(inst.cost, *inst.mu, *inst.nu).value;
            doc.abs_gap = std::abs(doc.report.value - *doc.oracle_value);
          }
        }
        const auto stop = std::chrono::steady_clock::now();
        cell.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
        cell.value = format_double(doc.report.value);
        if (doc.abs_gap) cell.gap = format_double(*doc.abs_gap);
        cell.iterations = doc.report.iterations;
        cell.converged = doc.report.converged;
        write_file(cell.report_path, write_report(doc));
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) first_error = e.what();
      }
    }
  };

  const int thread_count = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < thread_count; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (failed.load()) throw std::invalid_argument(first_error);

  std::string summary = "n,seed,value,gap,iterations,wall_time_ms\n";
  bool all_converged = true;
  for (const BenchCell& cell : cells) {
    char ms[32];
    std::snprintf(ms, sizeof(ms), "%.3f", cell.wall_ms);
    summary += std::to_string(cell.n) + "," + std::to_string(cell.seed) + "," + cell.value +
               "," + cell.gap + "," + std::to_string(cell.iterations) + "," + ms + "\n";
    all_converged = all_converged && cell.converged;
  }
  write_file((fs::path(out_dir) / "summary.csv").string(), summary);
  return all_converged ? kExitOk : kExitBudget;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropic solvers for optimal transport, minimum mean cycle, matrix "
               "scaling, and matrix balancing"};
  app.require_subcommand(1);

  std::string input, gen, out, trace, strategy = "greedy";
  std::string suite, sizes, seeds, bench_out;
  double epsilon = 0.05, eta = 0.0, tol = 0.0;
  bool verify = false;
  int jobs = 1;

  CLI::App* ot = app.add_subcommand("ot", "solve optimal transport to +-epsilon");
  ot->add_option("--input", input, "instance document (.json) or cost matrix (.csv)");
  ot->add_option("--gen", gen, "generator spec, e.g. uniform:n=16,seed=7");
  ot->add_option("--epsilon", epsilon, "additive accuracy")->required();
  ot->add_option("--out", out, "report path (default: stdout)");
  ot->add_option("--trace", trace, "per-sweep trace CSV path");
  ot->add_flag("--verify", verify, "compare against the exact oracle");

  CLI::App* mmc = app.add_subcommand("mmc", "solve minimum mean cycle to +-epsilon");
  mmc->add_option("--input", input, "instance document (.json) or cost matrix (.csv)");
  mmc->add_option("--gen", gen, "generator spec");
  mmc->add_option("--epsilon", epsilon, "additive accuracy")->required();
  mmc->add_option("--out", out, "report path (default: stdout)");
  mmc->add_option("--trace", trace, "per-pass trace CSV path");
  mmc->add_flag("--verify", verify, "compare against the Karp oracle");
  mmc->add_option("--strategy", strategy, "cyclic | greedy | random:SEED");

  CLI::App* scale = app.add_subcommand("scale", "matrix scaling at fixed eta");
  scale->add_option("--input", input, "instance document (.json) or cost matrix (.csv)");
  scale->add_option("--gen", gen, "generator spec");
  scale->add_option("--eta", eta, "inverse regularization")->required();
  scale->add_option("--tol", tol, "l1 marginal tolerance")->required();
  scale->add_option("--out", out, "report path (default: stdout)");
  scale->add_option("--trace", trace, "per-sweep trace CSV path");

  CLI::App* balance = app.add_subcommand("balance", "matrix balancing at fixed eta");
  balance->add_option("--input", input, "instance document (.json) or cost matrix (.csv)");
  balance->add_option("--gen", gen, "generator spec");
  balance->add_option("--eta", eta, "inverse regularization")->required();
  balance->add_option("--tol", tol, "relative Hellinger tolerance")->required();
  balance->add_option("--out", out, "report path (default: stdout)");
  balance->add_option("--trace", trace, "per-pass trace CSV path");
  balance->add_option("--strategy", strategy, "cyclic | greedy | random:SEED");

  CLI::App* bench = app.add_subcommand("bench", "run a (sizes x seeds) benchmark matrix");
  bench->add_option("--suite", suite, "uniform-ot | euclidean-ot | uniform-mmc")->required();
  bench->add_option("--sizes", sizes, "comma-separated sizes")->required();
  bench->add_option("--seeds", seeds, "comma-separated seeds")->required();
  bench->add_option("--out", bench_out, "output directory")->required();
  bench->add_option("--epsilon", epsilon, "additive accuracy (default 0.05)");
  bench->add_option("--jobs", jobs, "concurrent cells (default 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitInputError;
  }

  try {
    if (app.got_subcommand(ot)) return run_ot(input, gen, epsilon, out, trace, verify);
    if (app.got_subcommand(mmc))
      return run_mmc(input, gen, epsilon, out, trace, verify, strategy);
    if (app.got_subcommand(scale)) return run_scale(input, gen, eta, tol, out, trace);
    if (app.got_subcommand(balance))
      return run_balance(input, gen, eta, tol, out, trace, strategy);
    if (app.got_subcommand(bench))
      return run_bench(suite, sizes, seeds, bench_out, epsilon, jobs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}
