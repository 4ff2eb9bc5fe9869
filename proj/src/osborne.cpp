#include "couplings/osborne.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace couplings {

namespace {

void require_balancing(const LogScaledMatrix& m, const char* where) {
  if (m.mode() != ScalingMode::balancing) {
    throw std::invalid_argument(std::string(where) + ": requires balancing mode");
  }
}

// Off-diagonal log row/col sums of coordinate i.
std::pair<double, double> log_offdiag_sums(const LogScaledMatrix& m, int i) {
  const int n = m.size();
  std::vector<double> buf;
  buf.reserve(n - 1);
  for (int j = 0; j < n; ++j)
    if (j != i) buf.push_back(m.log_entry(i, j));
  const double log_rho = log_sum_exp(buf);
  buf.clear();
  for (int j = 0; j < n; ++j)
    if (j != i) buf.push_back(m.log_entry(j, i));
  const double log_gamma = log_sum_exp(buf);
  return {log_rho, log_gamma};
}

// One pass over the represented entries, shifted by the global off-diagonal
// maximum so the sums stay representable for any eta. Ratios of these
// shifted sums equal ratios of the true ones.
struct ShiftedState {
  double shift = 0.0;             // max off-diagonal log entry
  std::vector<double> rho;        // off-diagonal row sums, times exp(-shift)
  std::vector<double> gamma;      // off-diagonal column sums, times exp(-shift)
  double offdiag_mass = 0.0;      // times exp(-shift)
  double hellinger = 0.0;         // sum_i (sqrt rho - sqrt gamma)^2, times exp(-shift)
  double log_mass = 0.0;          // log of the true total mass, diagonal included
};

ShiftedState scan(const LogScaledMatrix& m) {
  const int n = m.size();
  ShiftedState s;
  s.rho.assign(n, 0.0);
  s.gamma.assign(n, 0.0);
  std::vector<double> entries(static_cast<size_t>(n) * n);
  double off_max = -std::numeric_limits<double>::infinity();
  double all_max = -std::numeric_limits<double>::infinity();
  size_t k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j, ++k) {
      entries[k] = m.log_entry(i, j);
      all_max = std::max(all_max, entries[k]);
      if (i != j) off_max = std::max(off_max, entries[k]);
    }
  s.shift = off_max;
  k = 0;
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j, ++k) {
      total += std::exp(entries[k] - all_max);
      if (i == j) continue;
      const double v = std::exp(entries[k] - off_max);
      s.rho[i] += v;
      s.gamma[j] += v;
      s.offdiag_mass += v;
    }
  s.log_mass = all_max + std::log(total);
  for (int i = 0; i < n; ++i) {
    const double d = std::sqrt(s.rho[i]) - std::sqrt(s.gamma[i]);
    s.hellinger += d * d;
  }
  return s;
}

int greedy_coordinate(const std::vector<double>& rho, const std::vector<double>& gamma) {
  int best = 0;
  double best_score = -1.0;
  for (size_t i = 0; i < rho.size(); ++i) {
    const double d = std::sqrt(rho[i]) - std::sqrt(gamma[i]);
    const double score = d * d;
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int random_coordinate(std::uint64_t seed, long step, int n) {
  std::mt19937_64 eng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(step))));
  const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
  return std::min(n - 1, static_cast<int>(u * n));
}

}  // namespace

LogScaledMatrix osborne_update(const LogScaledMatrix& m, int i) {
  require_balancing(m, "osborne_update");
  if (m.size() < 2) {
    throw std::invalid_argument("osborne_update: nothing to balance for n = 1");
  }
  if (i < 0 || i >= m.size()) {
    throw std::invalid_argument("osborne_update: coordinate out of range");
  }
  const auto [log_rho, log_gamma] = log_offdiag_sums(m, i);
  LogScaledMatrix out = m;
  out.add_to_x(i, (log_gamma - log_rho) / (2.0 * m.eta()));
  return out;
}

int choose_coordinate(const LogScaledMatrix& m, const OsborneConfig& cfg, long step) {
  require_balancing(m, "choose_coordinate");
  switch (cfg.strategy) {
    case CoordinateStrategy::cyclic:
      return static_cast<int>(step % m.size());
    case CoordinateStrategy::random:
      return random_coordinate(cfg.seed, step, m.size());
    case CoordinateStrategy::greedy: {
      const ShiftedState s = scan(m);
      return greedy_coordinate(s.rho, s.gamma);
    }
  }
  throw std::invalid_argument("choose_coordinate: unknown strategy");
}

std::pair<LogScaledMatrix, SolveReport> run_osborne(const CostMatrix& cost,
                                                    const OsborneConfig& cfg,
                                                    const OsborneObserver& observer) {
  const int n = cost.size();
  if (n < 2) throw std::invalid_argument("run_osborne: nothing to balance for n = 1");
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("run_osborne: eta must be positive");
  if (!(cfg.imbalance_tolerance > 0.0)) {
    throw std::invalid_argument("run_osborne: imbalance_tolerance must be positive");
  }
  if (cfg.max_updates < 1) {
    throw std::invalid_argument("run_osborne: max_updates must be >= 1");
  }

  LogScaledMatrix m = LogScaledMatrix::balancing(cost, cfg.eta);
  SolveReport report;
  const long trace_every = std::max(1, n);

  long step = 0;
  while (true) {
    const ShiftedState s = scan(m);
    if (!std::isfinite(s.log_mass)) {
      throw std::runtime_error("run_osborne: non-finite state at update " +
                               std::to_string(step));
    }
    const bool balanced = s.hellinger <= cfg.imbalance_tolerance * s.offdiag_mass;
    const bool exhausted = step >= cfg.max_updates;
    if (balanced || exhausted || step % trace_every == 0) {
      TraceRecord rec;
      rec.iter = step;
      rec.dual = -s.log_mass / cfg.eta;
      rec.imbalance = s.offdiag_mass > 0.0 ? s.hellinger / s.offdiag_mass : 0.0;
      report.trace.push_back(rec);
    }
    if (balanced) {
      report.converged = true;
      break;
    }
    if (exhausted) break;

    int i;
    switch (cfg.strategy) {
      case CoordinateStrategy::cyclic:
        i = static_cast<int>(step % n);
        break;
      case CoordinateStrategy::random:
        i = random_coordinate(cfg.seed, step, n);
        break;
      case CoordinateStrategy::greedy:
      default:
        i = greedy_coordinate(s.rho, s.gamma);
        break;
    }

    if (observer) {
      OsborneStepInfo info;
      info.step = step;
      info.coordinate = i;
      info.rho_before = s.rho[i] * std::exp(s.shift);
      info.gamma_before = s.gamma[i] * std::exp(s.shift);
      info.mass_before = std::exp(s.log_mass);
      info.dual_before = -s.log_mass / cfg.eta;
      m = osborne_update(m, i);
      const double log_mass_after = log_total_mass(m);
      info.mass_after = std::exp(log_mass_after);
      info.dual_after = -log_mass_after / cfg.eta;
      observer(info);
    } else {
      m = osborne_update(m, i);
    }
    ++step;
  }

  report.iterations = step;
  const double final_dual = report.trace.back().dual;
  report.value = final_dual;
  report.lower_bound = final_dual;
  report.upper_bound = final_dual;
  return {std::move(m), std::move(report)};
}

double mmc_lower_bound(const CostMatrix& cost, const std::vector<double>& x) {
  const int n = cost.size();
  if (static_cast<int>(x.size()) != n) {
    throw std::invalid_argument("mmc_lower_bound: potential size mismatch");
  }
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) best = std::min(best, cost(i, j) + x[i] - x[j]);
  return best;
}

Cycle extract_cycle_greedy(const CostMatrix& cost, const std::vector<double>& x) {
  const int n = cost.size();
  if (static_cast<int>(x.size()) != n) {
    throw std::invalid_argument("extract_cycle_greedy: potential size mismatch");
  }
  std::vector<int> best_cycle;
  double best_mean = std::numeric_limits<double>::infinity();
  std::vector<int> pos(n);
  for (int start = 0; start < n; ++start) {
    std::fill(pos.begin(), pos.end(), -1);
    std::vector<int> walk{start};
    pos[start] = 0;
    int cur = start;
    while (true) {
      int next = 0;
      double next_cost = std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) {
        const double rc = cost(cur, j) + x[cur] - x[j];
        if (rc < next_cost) {
          next_cost = rc;
          next = j;
        }
      }
      if (pos[next] >= 0) {
        std::vector<int> cyc(walk.begin() + pos[next], walk.end());
        double sum = 0.0;
        for (size_t t = 0; t < cyc.size(); ++t) {
          sum += cost(cyc[t], cyc[(t + 1) % cyc.size()]);
        }
        const double mean = sum / static_cast<double>(cyc.size());
        if (mean < best_mean) {
          best_mean = mean;
          best_cycle = std::move(cyc);
        }
        break;
      }
      pos[next] = static_cast<int>(walk.size());
      walk.push_back(next);
      cur = next;
    }
  }
  return Cycle(std::move(best_cycle));
}

std::vector<WeightedCycle> decompose_circulation(const Matrix& p) {
  const int n = p.size();
  double mass = 0.0;
  long nnz = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (!(p(i, j) >= 0.0)) {
        throw std::invalid_argument("decompose_circulation: negative or NaN entry");
      }
      mass += p(i, j);
      if (p(i, j) > 0.0) ++nnz;
    }
  const std::vector<double> r = row_marginals(p);
  const std::vector<double> c = col_marginals(p);
  double imbalance = 0.0;
  for (int i = 0; i < n; ++i) imbalance += std::abs(r[i] - c[i]);
  if (imbalance > 1e-10 * mass) {
    throw std::invalid_argument(
        "decompose_circulation: row and column marginals differ; balance the input first");
  }

  const double support_tol = 1e-13 * mass;
  Matrix w = p;
  std::vector<WeightedCycle> out;
  std::vector<int> pos(n);

  for (long round = 0; round < nnz; ++round) {
    // start the walk at the head of the heaviest remaining entry
    int bi = -1, bj = -1;
    double best = support_tol;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (w(i, j) > best) {
          best = w(i, j);
          bi = i;
          bj = j;
        }
    if (bi < 0) break;

    std::fill(pos.begin(), pos.end(), -1);
    std::vector<int> walk{bi};
    pos[bi] = 0;
    int cur = bi;
    int stuck_prev = -1;
    std::vector<int> cyc;
    while (true) {
      int next = -1;
      double heaviest = support_tol;
      for (int j = 0; j < n; ++j)
        if (w(cur, j) > heaviest) {
          heaviest = w(cur, j);
          next = j;
        }
      if (next < 0) {
        stuck_prev = cur;
        break;
      }
      if (pos[next] >= 0) {
        cyc.assign(walk.begin() + pos[next], walk.end());
        break;
      }
      pos[next] = static_cast<int>(walk.size());
      walk.push_back(next);
      cur = next;
    }
    if (stuck_prev >= 0) {
      // a dead end can only carry residual mass near the tolerance floor;
      // drop the incoming edge and continue
      if (walk.size() >= 2) w(walk[walk.size() - 2], stuck_prev) = 0.0;
      else w(bi, bj) = 0.0;
      continue;
    }

    double bottleneck = std::numeric_limits<double>::infinity();
    for (size_t t = 0; t < cyc.size(); ++t) {
      bottleneck = std::min(bottleneck, w(cyc[t], cyc[(t + 1) % cyc.size()]));
    }
    for (size_t t = 0; t < cyc.size(); ++t) {
      double& entry = w(cyc[t], cyc[(t + 1) % cyc.size()]);
      entry = entry <= bottleneck ? 0.0 : entry - bottleneck;
    }
    out.push_back({bottleneck * static_cast<double>(cyc.size()), Cycle(std::move(cyc))});
  }
  return out;
}

SolveReport solve_mmc(const CostMatrix& cost, double epsilon, CoordinateStrategy strategy,
                      std::uint64_t seed, const OsborneObserver& observer) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("solve_mmc: epsilon must be positive");
  const int n = cost.size();
  if (n == 1) {
    SolveReport report;
    report.value = cost(0, 0);
    report.lower_bound = report.value;
    report.upper_bound = report.value;
    report.converged = true;
    report.certificate = Cycle({0});
    return report;
  }

  const double cmax = cost.max_abs();
  const double scale = cmax > 0.0 ? cmax : 1.0;
  Matrix normalized(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) normalized(i, j) = cost(i, j) / scale;
  const CostMatrix cost_n(std::move(normalized));

  const double eps_scaled = epsilon / scale;
  OsborneConfig cfg;
  cfg.eta = 4.0 * std::log(static_cast<double>(n + 1)) / eps_scaled;
  cfg.imbalance_tolerance = 1e-4;
  cfg.max_updates = 50000 + 200L * n;
  cfg.strategy = strategy;
  cfg.seed = seed;
  if (cfg.eta * std::numeric_limits<double>::epsilon() * 16.0 > eps_scaled / 8.0) {
    throw std::invalid_argument(
        "solve_mmc: epsilon is too small for double precision at this cost scale; "
        "rescale the costs or relax epsilon");
  }

  auto [m, inner] = run_osborne(cost_n, cfg, observer);

  // The iterate represents P_ij = exp(eta (x_i - x_j - C_ij)), whose reduced
  // cost is C_ij - x_i + x_j; the telescoping bounds expect the negated
  // potentials.
  std::vector<double> dual_x(n);
  for (int i = 0; i < n; ++i) dual_x[i] = -m.x(i);

  SolveReport report;
  report.iterations = inner.iterations;
  report.trace = std::move(inner.trace);
  for (TraceRecord& rec : report.trace) rec.dual *= scale;
  report.lower_bound = mmc_lower_bound(cost_n, dual_x) * scale;

  Cycle cyc = extract_cycle_greedy(cost_n, dual_x);
  double upper = cycle_mean(cost, cyc);
  int best_loop = 0;
  for (int i = 1; i < n; ++i)
    if (cost(i, i) < cost(best_loop, best_loop)) best_loop = i;
  if (cost(best_loop, best_loop) < upper) {
    upper = cost(best_loop, best_loop);
    cyc = Cycle({best_loop});
  }
  report.upper_bound = upper;
  // both bounds are valid, but the two un-normalization paths can round one
  // ulp apart when the extracted cycle attains the bound exactly
  report.lower_bound = std::min(report.lower_bound, upper);
  report.value = upper;
  report.certificate = std::move(cyc);
  report.converged = report.upper_bound - report.lower_bound <= epsilon + 1e-12;
  return report;
}

}  // namespace couplings
