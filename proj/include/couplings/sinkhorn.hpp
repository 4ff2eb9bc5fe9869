#pragma once

#include <functional>
#include <utility>

#include "couplings/log_kernel.hpp"

namespace couplings {

struct SinkhornConfig {
  double eta = 1.0;
  double marginal_tolerance = 1e-8;  // l1 on both marginals, checked after the column step
  long max_iterations = 100000;      // sweeps (row step + column step)
  long trace_every = 1;
};

// Emitted once per half-step when an observer is installed. Duals and mass
// refer to the represented matrix immediately before/after the step.
struct SinkhornStepInfo {
  long sweep = 0;  // 1-based
  bool is_row_step = false;
  double dual_before = 0.0;
  double dual_after = 0.0;
  double mass_before = 0.0;
  std::vector<double> row_marginals_before;
  std::vector<double> col_marginals_before;
};

using SinkhornObserver = std::function<void(const SinkhornStepInfo&)>;

// x_i += eta^-1 (log mu_i - log r_i(P)); afterwards the represented rows
// equal mu exactly. Requires scaling mode and strictly positive mu.
LogScaledMatrix sinkhorn_row_step(const LogScaledMatrix& m, const Distribution& mu);

// Column mirror of sinkhorn_row_step.
LogScaledMatrix sinkhorn_col_step(const LogScaledMatrix& m, const Distribution& nu);

// Alternates row and column steps from x = y = 0, recording the dual
// objective and the l1 marginal error each sweep. Stops when the error
// measured after the column step drops to cfg.marginal_tolerance.
std::pair<LogScaledMatrix, SolveReport> run_sinkhorn(const CostMatrix& cost,
                                                     const Distribution& mu,
                                                     const Distribution& nu,
                                                     const SinkhornConfig& cfg,
                                                     const SinkhornObserver& observer = {});

// Rounds a nonnegative matrix onto the transportation polytope: shrink rows
// to at most mu, shrink columns to at most nu, then add the rank-one
// deficiency correction. Output marginals are exactly (mu, nu) and the cost
// increase is at most 2 ||C||_inf (||r(P)-mu||_1 + ||c(P)-nu||_1).
Coupling round_to_coupling(const Matrix& p, const Distribution& mu, const Distribution& nu);

// Full OT pipeline to additive accuracy epsilon: normalizes costs, runs
// Sinkhorn with eta = 4 log(n) / eps and marginal tolerance eps / 8 (on the
// normalized scale), rounds to a feasible coupling, and reports the rounded
// cost with a dual lower bound. Atoms with zero mass are dropped up front
// (only an equal number on each side is supported; the certificate is
// re-embedded at full size).
SolveReport solve_ot(const CostMatrix& cost, const Distribution& mu, const Distribution& nu,
                     double epsilon, const SinkhornObserver& observer = {});

}  // namespace couplings
