#pragma once

#include <cstdint>
#include <functional>
#include <utility>

#include "couplings/log_kernel.hpp"

namespace couplings {

enum class CoordinateStrategy { cyclic, random, greedy };

struct OsborneConfig {
  double eta = 1.0;
  // Stop when sum_i (sqrt(rho_i) - sqrt(gamma_i))^2 <= tolerance * (total
  // off-diagonal mass).
  double imbalance_tolerance = 1e-4;
  long max_updates = 100000;
  CoordinateStrategy strategy = CoordinateStrategy::greedy;
  std::uint64_t seed = 0;  // used by the random strategy
};

struct OsborneStepInfo {
  long step = 0;  // 0-based update counter
  int coordinate = 0;
  double rho_before = 0.0;    // off-diagonal row sum of the coordinate
  double gamma_before = 0.0;  // off-diagonal column sum of the coordinate
  double mass_before = 0.0;   // total represented mass (diagonal included)
  double mass_after = 0.0;
  double dual_before = 0.0;
  double dual_after = 0.0;
};

using OsborneObserver = std::function<void(const OsborneStepInfo&)>;

// x_i += (2 eta)^-1 (log gamma_i - log rho_i) where rho_i / gamma_i are the
// off-diagonal row / column sums of the represented matrix. Afterwards both
// equal sqrt(rho_i gamma_i); the diagonal never moves under a similarity
// transform. Requires balancing mode and n >= 2.
LogScaledMatrix osborne_update(const LogScaledMatrix& m, int i);

// cyclic: step mod n. random: seeded uniform draw, a pure function of
// (seed, step). greedy: argmax_i (sqrt(rho_i) - sqrt(gamma_i))^2 with ties
// to the smallest index.
int choose_coordinate(const LogScaledMatrix& m, const OsborneConfig& cfg, long step);

// Coordinate updates from x = 0 until the relative Hellinger imbalance
// drops below cfg.imbalance_tolerance or the update budget is exhausted.
std::pair<LogScaledMatrix, SolveReport> run_osborne(const CostMatrix& cost,
                                                    const OsborneConfig& cfg,
                                                    const OsborneObserver& observer = {});

// min over all ordered pairs (i, j), self-loops included, of
// C_ij + x_i - x_j. A lower bound on the minimum mean cycle for every x,
// because potentials telescope around any cycle.
double mmc_lower_bound(const CostMatrix& cost, const std::vector<double>& x);

// From each start vertex, follow the outgoing edge of minimum reduced cost
// C_ij + x_i - x_j (ties to the smallest j) until a vertex repeats, and keep
// the best-mean simple cycle seen. Its mean upper-bounds the MMC value.
Cycle extract_cycle_greedy(const CostMatrix& cost, const std::vector<double>& x);

struct WeightedCycle {
  double weight = 0.0;  // cycle length times the subtracted bottleneck mass
  Cycle cycle;
};

// Peels a balanced nonnegative matrix into weighted simple cycles: walk the
// support until a vertex repeats, subtract the bottleneck, repeat. At most
// nnz(P) cycles; sum of weight * (indicator / length) reconstructs P.
std::vector<WeightedCycle> decompose_circulation(const Matrix& p);

// Full MMC pipeline to additive accuracy epsilon: normalizes costs, runs
// Osborne with eta = 4 log(n + 1) / eps, and reports the telescoping lower
// bound together with a certified cycle upper bound (self-loops are always
// checked as candidate certificates).
SolveReport solve_mmc(const CostMatrix& cost, double epsilon,
                      CoordinateStrategy strategy = CoordinateStrategy::greedy,
                      std::uint64_t seed = 0, const OsborneObserver& observer = {});

}  // namespace couplings
