// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. argv[1] is the CLI binary, used by the determinism criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "couplings/instance_io.hpp"
#include "couplings/oracles.hpp"
#include "couplings/osborne.hpp"
#include "couplings/rng.hpp"
#include "couplings/sinkhorn.hpp"

namespace fs = std::filesystem;
using namespace couplings;

namespace {

struct CriterionResult {
  bool pass = false;
  std::string detail;
};

// shared dual-ascent bookkeeping across every observed solver run (criterion 4)
long g_sinkhorn_steps = 0;
long g_osborne_steps = 0;
long g_ascent_violations = 0;

const SinkhornObserver kSinkhornAscentObserver = [](const SinkhornStepInfo& info) {
  ++g_sinkhorn_steps;
  if (info.dual_after < info.dual_before - 1e-12) ++g_ascent_violations;
};

const OsborneObserver kOsborneAscentObserver = [](const OsborneStepInfo& info) {
  ++g_osborne_steps;
  if (info.dual_after < info.dual_before - 1e-12) ++g_ascent_violations;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, args...);
  return buf;
}

CriterionResult ot_guarantee() {
  constexpr double eps = 0.05;
  double max_gap = 0.0;
  double total_ms = 0.0;
  int instances = 0;
  const auto check_instance = [&](const ProblemInstance& inst) {
    const auto start = std::chrono::steady_clock::now();
    const SolveReport report =
        solve_ot(inst.cost, *inst.mu, *inst.nu, eps, kSinkhornAscentObserver);
    total_ms += std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    const ExactOtResult exact = exact_ot(inst.cost, *inst.mu, *inst.nu);
    max_gap = std::max(max_gap, std::abs(report.value - exact.value));
    ++instances;
    return report.converged;
  };
  bool all_converged = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    all_converged &= check_instance(gen_uniform_cost(ProblemKind::ot, 16, seed));
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    all_converged &= check_instance(gen_euclidean_ot(16, 2, 2.0, seed));
  }
  return {all_converged && max_gap <= eps,
          fmt("70 instances, max |value - oracle| = %.4f (budget %.2f), mean %.1f ms",
              max_gap, eps, total_ms / instances)};
}

CriterionResult mmc_guarantee() {
  constexpr double eps = 0.05;
  double max_width = 0.0;
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const ProblemInstance inst = gen_uniform_cost(ProblemKind::mmc, 12, seed);
    const SolveReport report = solve_mmc(inst.cost, eps, CoordinateStrategy::greedy, 0,
                                         kOsborneAscentObserver);
    const MmcResult karp = karp_mmc(inst.cost);
    ok &= report.lower_bound <= karp.value + 1e-12;
    ok &= report.upper_bound >= karp.value - 1e-12;
    ok &= report.upper_bound - report.lower_bound <= eps + 1e-12;
    max_width = std::max(max_width, report.upper_bound - report.lower_bound);
  }
  return {ok, fmt("50 instances, bracket always contains karp, max width = %.4f (budget %.2f)",
                  max_width, eps)};
}

CriterionResult oracle_cross_validation() {
  Rng64 rng(2024);
  double max_diff = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_unit() * 5);
    Matrix c(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = rng.next_unit();
    const CostMatrix cost(std::move(c));
    max_diff = std::max(max_diff,
                        std::abs(karp_mmc(cost).value - brute_force_mmc(cost).value));
  }
  return {max_diff <= 1e-12, fmt("200 instances n in [2,6], max |karp - brute| = %.2e", max_diff)};
}

CriterionResult dual_ascent() {
  return {g_ascent_violations == 0 && g_sinkhorn_steps > 0 && g_osborne_steps > 0,
          fmt("%ld sinkhorn half-steps + %ld osborne updates, %ld violations (slack 1e-12)",
              g_sinkhorn_steps, g_osborne_steps, g_ascent_violations)};
}

CriterionResult sinkhorn_kl_identity() {
  constexpr double eta = 50.0;
  Rng64 rng(5);
  long checked = 0;
  double max_rel = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 8;
    Matrix c(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = rng.next_unit();
    std::vector<double> w(n);
    double total = 0.0;
    for (double& v : w) total += v = 0.05 + rng.next_unit();
    for (double& v : w) v /= total;
    const Distribution mu(w);
    const Distribution nu = Distribution::uniform(n);
    const SinkhornObserver observer = [&](const SinkhornStepInfo& info) {
      kSinkhornAscentObserver(info);
      if (!info.is_row_step || std::abs(info.mass_before - 1.0) > 1e-12) return;
      const double expected = kl_divergence(mu.weights(), info.row_marginals_before) / eta;
      if (expected < 1e-5) return;  // relative comparison needs signal above float noise
      const double gain = info.dual_after - info.dual_before;
      max_rel = std::max(max_rel, std::abs(gain - expected) / expected);
      ++checked;
    };
    run_sinkhorn(CostMatrix(std::move(c)), mu, nu, SinkhornConfig{eta, 1e-10, 60, 1},
                 observer);
  }
  return {checked >= 30 && max_rel <= 1e-8,
          fmt("%ld sweep boundaries checked, max relative mismatch = %.2e", checked, max_rel)};
}

CriterionResult osborne_hellinger_identity() {
  Rng64 rng(6);
  double max_err = 0.0;
  long checked = 0;
  for (CoordinateStrategy strategy :
       {CoordinateStrategy::cyclic, CoordinateStrategy::random, CoordinateStrategy::greedy}) {
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 8;
      Matrix c(n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) c(i, j) = rng.next_unit();
      const OsborneObserver observer = [&](const OsborneStepInfo& info) {
        kOsborneAscentObserver(info);
        const double d = std::sqrt(info.rho_before) - std::sqrt(info.gamma_before);
        max_err = std::max(max_err,
                           std::abs((info.mass_before - info.mass_after) - d * d));
        ++checked;
      };
      run_osborne(CostMatrix(std::move(c)),
                  OsborneConfig{5.0, 1e-8, 5000, strategy, 11}, observer);
    }
  }
  return {checked > 0 && max_err <= 1e-10,
          fmt("%ld updates over 3 strategies, max |mass drop - hellinger| = %.2e", checked,
              max_err)};
}

CriterionResult softmin_sandwich() {
  Rng64 rng(7);
  bool ok = true;
  double worst_margin = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 1 + static_cast<int>(rng.next_unit() * 9);
    const double mag = std::pow(10.0, rng.next_uniform(-6.0, 6.0));
    const double eta = std::pow(10.0, rng.next_uniform(-2.0, 6.0));
    std::vector<double> a(m);
    double mn = std::numeric_limits<double>::infinity();
    for (double& v : a) {
      v = rng.next_uniform(-mag, mag);
      mn = std::min(mn, v);
    }
    const double s = softmin(a, eta);
    const double slack = 4.0 * std::numeric_limits<double>::epsilon() *
                         std::max({1.0, std::abs(mn), std::abs(s)});
    ok &= std::isfinite(s);
    ok &= s <= mn + slack;
    ok &= s >= mn - std::log(static_cast<double>(m)) / eta - slack;
    worst_margin = std::max(worst_margin, s - mn);
  }
  return {ok, fmt("1000 vectors, |a| up to 1e6, eta up to 1e6, max (softmin - min) = %.2e",
                  worst_margin)};
}

CriterionResult rounding_guarantees() {
  Rng64 rng(8);
  double max_feasibility = 0.0;
  bool cost_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_unit() * 6);
    Matrix c(n), p(n);
    std::vector<double> mw(n), nw(n);
    double mt = 0.0, nt = 0.0;
    for (int i = 0; i < n; ++i) {
      mt += mw[i] = 0.05 + rng.next_unit();
      nt += nw[i] = 0.05 + rng.next_unit();
      for (int j = 0; j < n; ++j) {
        c(i, j) = rng.next_uniform(-1.0, 1.0);
        p(i, j) = rng.next_unit() / (n * n);
      }
    }
    for (int i = 0; i < n; ++i) {
      mw[i] /= mt;
      nw[i] /= nt;
    }
    const Distribution mu(mw), nu(nw);
    const CostMatrix cost(std::move(c));

    const auto r = row_marginals(p);
    const auto cm = col_marginals(p);
    double err = 0.0;
    for (int i = 0; i < n; ++i) err += std::abs(r[i] - mu[i]) + std::abs(cm[i] - nu[i]);

    const Coupling out = round_to_coupling(p, mu, nu);
    const auto rr = row_marginals(out.matrix());
    const auto cc = col_marginals(out.matrix());
    double feas = 0.0;
    for (int i = 0; i < n; ++i) feas += std::abs(rr[i] - mu[i]) + std::abs(cc[i] - nu[i]);
    max_feasibility = std::max(max_feasibility, feas);
    cost_ok &= transport_cost(out, cost) <=
               transport_cost(p, cost) + 2.0 * cost.max_abs() * err + 1e-12;
  }
  return {max_feasibility <= 1e-12 && cost_ok,
          fmt("100 triples, max l1 infeasibility = %.2e, cost bound held", max_feasibility)};
}

CriterionResult circulation_decomposition() {
  Rng64 rng(9);
  double max_err = 0.0;
  bool count_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_unit() * 7);
    Matrix p(n, 0.0);
    const int pieces = 1 + static_cast<int>(rng.next_unit() * 5);
    std::vector<double> weights(pieces);
    double total = 0.0;
    for (double& w : weights) total += w = 0.1 + rng.next_unit();
    for (int piece = 0; piece < pieces; ++piece) {
      std::vector<int> perm(n);
      for (int i = 0; i < n; ++i) perm[i] = i;
      for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next_unit() * (i + 1));
        std::swap(perm[i], perm[j]);
      }
      const int len = 1 + static_cast<int>(rng.next_unit() * n);
      const double w = weights[piece] / total;  // convex combination of cycles
      for (int t = 0; t < len; ++t) p(perm[t], perm[(t + 1) % len]) += w / len;
    }
    long nnz = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (p(i, j) > 0.0) ++nnz;

    const auto parts = decompose_circulation(p);
    count_ok &= static_cast<long>(parts.size()) <= nnz;
    Matrix rebuilt(n, 0.0);
    for (const auto& part : parts) {
      const auto& v = part.cycle.vertices;
      for (size_t t = 0; t < v.size(); ++t) {
        rebuilt(v[t], v[(t + 1) % v.size()]) += part.weight / v.size();
      }
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        max_err = std::max(max_err, std::abs(rebuilt(i, j) - p(i, j)));
  }
  return {max_err <= 1e-9 && count_ok,
          fmt("100 circulations, max reconstruction error = %.2e, cycle count <= nnz", max_err)};
}

CriterionResult entropic_optimality() {
  Rng64 rng(10);
  constexpr double eta = 10.0;
  bool ok = true;
  double min_margin = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4;
    Matrix c(n);
    std::vector<double> mw(n), nw(n);
    double mt = 0.0, nt = 0.0;
    for (int i = 0; i < n; ++i) {
      mt += mw[i] = 0.05 + rng.next_unit();
      nt += nw[i] = 0.05 + rng.next_unit();
      for (int j = 0; j < n; ++j) c(i, j) = rng.next_unit();
    }
    for (int i = 0; i < n; ++i) {
      mw[i] /= mt;
      nw[i] /= nt;
    }
    const Distribution mu(mw), nu(nw);
    const CostMatrix cost(std::move(c));
    const auto [m, report] = run_sinkhorn(cost, mu, nu, SinkhornConfig{eta, 1e-10, 5000, 1},
                                          kSinkhornAscentObserver);
    ok &= report.converged;
    const Coupling solved = round_to_coupling(materialize(m), mu, nu);
    const double objective = transport_cost(solved, cost) + entropy(solved) / eta;
    for (int s = 0; s < 1000; ++s) {
      const Coupling q = random_feasible_coupling(mu, nu, 5000 * trial + s);
      const double other = transport_cost(q, cost) + entropy(q) / eta;
      min_margin = std::min(min_margin, other - objective);
      ok &= objective <= other + 1e-9;
    }
  }
  return {ok, fmt("20 instances x 1000 couplings, min margin over random = %.4f", min_margin)};
}

// ---- criterion 11: CLI determinism --------------------------------------

std::string g_cli_path;

int run_cli(const std::string& args) {
  const std::string cmd = g_cli_path + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

CriterionResult cli_determinism() {
  if (g_cli_path.empty()) {
    return {false, "CLI path not supplied (pass the binary as argv[1])"};
  }
  const fs::path dir = fs::temp_directory_path() / "couplings_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
      {"ot --gen euclidean:n=16,d=2,p=2,seed=7 --epsilon 0.05 --verify --out {d}/ot.json "
       "--trace {d}/ot.csv",
       {"ot.json", "ot.csv"}},
      {"mmc --gen uniform:n=12,seed=3 --epsilon 0.05 --verify --strategy random:42 "
       "--out {d}/mmc.json --trace {d}/mmc.csv",
       {"mmc.json", "mmc.csv"}},
      {"scale --gen uniform:n=6,seed=2 --eta 5 --tol 1e-10 --out {d}/scale.json",
       {"scale.json"}},
      {"balance --gen uniform:n=6,seed=2 --eta 5 --tol 1e-6 --out {d}/balance.json",
       {"balance.json"}},
      {"bench --suite uniform-mmc --sizes 4,6 --seeds 0,1 --out {d}/bench",
       {"bench/uniform-mmc-n4-s0.json", "bench/uniform-mmc-n4-s1.json",
        "bench/uniform-mmc-n6-s0.json", "bench/uniform-mmc-n6-s1.json"}},
  };

  int compared = 0;
  for (const auto& [tmpl, outputs] : commands) {
    std::string cmd = tmpl;
    size_t at;
    while ((at = cmd.find("{d}")) != std::string::npos) cmd.replace(at, 3, dir.string());
    if (run_cli(cmd) != 0) return {false, "command failed: " + cmd};
    std::vector<std::string> first;
    for (const std::string& f : outputs) first.push_back(slurp(dir / f));
    if (run_cli(cmd) != 0) return {false, "rerun failed: " + cmd};
    for (size_t i = 0; i < outputs.size(); ++i) {
      if (slurp(dir / outputs[i]) != first[i]) {
        return {false, "rerun changed " + outputs[i]};
      }
      ++compared;
    }
  }
  fs::remove_all(dir);
  return {true, fmt("5 commands re-run, %d report/trace bodies byte-identical", compared)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_cli_path = argv[1];

  std::vector<std::pair<std::string, std::function<CriterionResult()>>> criteria = {
      {"OT solved to +-epsilon against the exact oracle", ot_guarantee},
      {"MMC bracket contains karp and has width <= epsilon", mmc_guarantee},
      {"karp agrees with brute-force enumeration", oracle_cross_validation},
      {"dual objective nondecreasing at every step", dual_ascent},
      {"sinkhorn row-step gain equals eta^-1 KL(mu || r(P))", sinkhorn_kl_identity},
      {"osborne mass drop equals the coordinate Hellinger imbalance",
       osborne_hellinger_identity},
      {"softmin sandwiched in [min - log(m)/eta, min]", softmin_sandwich},
      {"rounding is exactly feasible with bounded cost increase", rounding_guarantees},
      {"circulation decomposition reconstructs its input", circulation_decomposition},
      {"converged scaling beats random couplings on the entropic objective",
       entropic_optimality},
      {"CLI reports are byte-identical across reruns", cli_determinism},
  };

  // criterion 4 aggregates observations from 1, 2, 5, 6, and 10; evaluate it last
  std::vector<CriterionResult> results(criteria.size());
  for (size_t i = 0; i < criteria.size(); ++i) {
    if (i == 3) continue;
    results[i] = criteria[i].second();
  }
  results[3] = dual_ascent();

  bool all_pass = true;
  for (size_t i = 0; i < criteria.size(); ++i) {
    all_pass &= results[i].pass;
    std::printf("[%s] criterion %zu: %s - %s\n", results[i].pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), results[i].detail.c_str());
  }
  std::printf("%s\n", all_pass ? "acceptance: ALL PASS" : "acceptance: FAILURES");
  return all_pass ? 0 : 1;
}
