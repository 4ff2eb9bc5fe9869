#include "couplings/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace couplings {

namespace {

std::vector<double> exp_each(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = std::exp(v[i]);
  return out;
}

double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

void require_positive_marginal(const Distribution& d, const char* name) {
  if (!d.is_strictly_positive()) {
    throw std::invalid_argument(std::string(name) +
                                ": zero-mass atoms must be dropped before scaling");
  }
}

}  // namespace

LogScaledMatrix sinkhorn_row_step(const LogScaledMatrix& m, const Distribution& mu) {
  if (m.mode() != ScalingMode::scaling) {
    throw std::invalid_argument("sinkhorn_row_step: requires scaling mode");
  }
  if (mu.size() != m.size()) {
    throw std::invalid_argument("sinkhorn_row_step: marginal size mismatch");
  }
  require_positive_marginal(mu, "sinkhorn_row_step: mu");
  const int n = m.size();
  LogScaledMatrix out = m;
  std::vector<double> buf(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) buf[j] = m.log_entry(i, j);
    const double log_row = log_sum_exp(buf);
    out.add_to_x(i, (std::log(mu[i]) - log_row) / m.eta());
  }
  return out;
}

LogScaledMatrix sinkhorn_col_step(const LogScaledMatrix& m, const Distribution& nu) {
  if (m.mode() != ScalingMode::scaling) {
    throw std::invalid_argument("sinkhorn_col_step: requires scaling mode");
  }
  if (nu.size() != m.size()) {
    throw std::invalid_argument("sinkhorn_col_step: marginal size mismatch");
  }
  require_positive_marginal(nu, "sinkhorn_col_step: nu");
  const int n = m.size();
  LogScaledMatrix out = m;
  std::vector<double> buf(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) buf[i] = m.log_entry(i, j);
    const double log_col = log_sum_exp(buf);
    out.add_to_y(j, (std::log(nu[j]) - log_col) / m.eta());
  }
  return out;
}

namespace {

SinkhornStepInfo capture_before(const LogScaledMatrix& m, long sweep, bool is_row) {
  SinkhornStepInfo info;
  info.sweep = sweep;
  info.is_row_step = is_row;
  const LogMarginals lm = log_marginals(m);
  info.row_marginals_before = exp_each(lm.log_rows);
  info.col_marginals_before = exp_each(lm.log_cols);
  info.mass_before = std::exp(log_total_mass(m));
  return info;
}

}  // namespace

std::pair<LogScaledMatrix, SolveReport> run_sinkhorn(const CostMatrix& cost,
                                                     const Distribution& mu,
                                                     const Distribution& nu,
                                                     const SinkhornConfig& cfg,
                                                     const SinkhornObserver& observer) {
  if (mu.size() != cost.size() || nu.size() != cost.size()) {
    throw std::invalid_argument("run_sinkhorn: marginal size mismatch");
  }
  require_positive_marginal(mu, "run_sinkhorn: mu");
  require_positive_marginal(nu, "run_sinkhorn: nu");
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("run_sinkhorn: eta must be positive");
  if (!(cfg.marginal_tolerance > 0.0)) {
    throw std::invalid_argument("run_sinkhorn: marginal_tolerance must be positive");
  }
  if (cfg.max_iterations < 1) {
    throw std::invalid_argument("run_sinkhorn: max_iterations must be >= 1");
  }

  LogScaledMatrix m = LogScaledMatrix::scaling(cost, cfg.eta);
  SolveReport report;
  const long trace_every = std::max<long>(1, cfg.trace_every);

  for (long sweep = 1; sweep <= cfg.max_iterations; ++sweep) {
    if (observer) {
      SinkhornStepInfo info = capture_before(m, sweep, /*is_row=*/true);
      info.dual_before = dual_objective(m, mu, nu);
      m = sinkhorn_row_step(m, mu);
      info.dual_after = dual_objective(m, mu, nu);
      observer(info);

      info = capture_before(m, sweep, /*is_row=*/false);
      info.dual_before = dual_objective(m, mu, nu);
      m = sinkhorn_col_step(m, nu);
      info.dual_after = dual_objective(m, mu, nu);
      observer(info);
    } else {
      m = sinkhorn_row_step(m, mu);
      m = sinkhorn_col_step(m, nu);
    }

    const LogMarginals lm = log_marginals(m);
    const std::vector<double> r = exp_each(lm.log_rows);
    const std::vector<double> c = exp_each(lm.log_cols);
    const double err = l1_distance(r, mu.weights()) + l1_distance(c, nu.weights());
    const double dual = dual_objective(m, mu, nu);
    if (!std::isfinite(dual)) {
      throw std::runtime_error("run_sinkhorn: non-finite dual objective at sweep " +
                               std::to_string(sweep));
    }
    report.iterations = sweep;
    const bool stopping = err <= cfg.marginal_tolerance || sweep == cfg.max_iterations;
    if (sweep % trace_every == 0 || stopping) {
      TraceRecord rec;
      rec.iter = sweep;
      rec.dual = dual;
      rec.imbalance = err;
      rec.kl_row = kl_divergence(mu.weights(), r);
      rec.kl_col = kl_divergence(nu.weights(), c);
      report.trace.push_back(rec);
    }
    if (err <= cfg.marginal_tolerance) {
      report.converged = true;
      break;
    }
  }

  const double final_dual = report.trace.empty() ? 0.0 : report.trace.back().dual;
  report.value = final_dual;
  report.lower_bound = final_dual;
  report.upper_bound = final_dual;
  return {std::move(m), std::move(report)};
}

Coupling round_to_coupling(const Matrix& p, const Distribution& mu, const Distribution& nu) {
  const int n = p.size();
  if (mu.size() != n || nu.size() != n) {
    throw std::invalid_argument("round_to_coupling: marginal size mismatch");
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!(p(i, j) >= 0.0)) {
        throw std::invalid_argument("round_to_coupling: input has a negative or NaN entry");
      }
  if (p.total() == 0.0) {
    throw std::invalid_argument("round_to_coupling: input has zero total mass");
  }

  Matrix q = p;
  std::vector<double> r = row_marginals(q);
  for (int i = 0; i < n; ++i) {
    if (r[i] > mu[i]) {
      const double f = mu[i] / r[i];
      for (int j = 0; j < n; ++j) q(i, j) *= f;
    }
  }
  std::vector<double> c = col_marginals(q);
  for (int j = 0; j < n; ++j) {
    if (c[j] > nu[j]) {
      const double f = nu[j] / c[j];
      for (int i = 0; i < n; ++i) q(i, j) *= f;
    }
  }

  r = row_marginals(q);
  c = col_marginals(q);
  std::vector<double> dr(n), dc(n);
  double deficiency = 0.0;
  for (int i = 0; i < n; ++i) {
    dr[i] = std::max(0.0, mu[i] - r[i]);
    dc[i] = std::max(0.0, nu[i] - c[i]);
    deficiency += dr[i];
  }
  if (deficiency > 0.0) {
    for (int i = 0; i < n; ++i) {
      if (dr[i] == 0.0) continue;
      for (int j = 0; j < n; ++j) q(i, j) += dr[i] * dc[j] / deficiency;
    }
  }
  return Coupling(std::move(q));
}

namespace {

SolveReport trivial_report(double value) {
  SolveReport report;
  report.value = value;
  report.lower_bound = value;
  report.upper_bound = value;
  report.converged = true;
  report.certificate = Coupling(Matrix(1, 1.0));
  return report;
}

// Restrict an OT instance to the atoms with positive mass. The square-only
// machinery here requires equally many dropped atoms on both sides.
SolveReport solve_ot_with_dropped_atoms(const CostMatrix& cost, const Distribution& mu,
                                        const Distribution& nu, double epsilon,
                                        const SinkhornObserver& observer) {
  const int n = cost.size();
  std::vector<int> rows, cols;
  for (int i = 0; i < n; ++i)
    if (mu[i] > 0.0) rows.push_back(i);
  for (int j = 0; j < n; ++j)
    if (nu[j] > 0.0) cols.push_back(j);
  if (rows.size() != cols.size()) {
    throw std::invalid_argument(
        "solve_ot: mu and nu have different numbers of zero-mass atoms; drop them "
        "from the instance first");
  }
  const int k = static_cast<int>(rows.size());
  Matrix sub(k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) sub(a, b) = cost(rows[a], cols[b]);
  std::vector<double> mu_sub(k), nu_sub(k);
  for (int a = 0; a < k; ++a) mu_sub[a] = mu[rows[a]];
  for (int b = 0; b < k; ++b) nu_sub[b] = nu[cols[b]];

  SolveReport report = solve_ot(CostMatrix(std::move(sub)), Distribution(std::move(mu_sub)),
                                Distribution(std::move(nu_sub)), epsilon, observer);
  if (const Coupling* plan = std::get_if<Coupling>(&report.certificate)) {
    Matrix full(n, 0.0);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) full(rows[a], cols[b]) = (*plan)(a, b);
    report.certificate = Coupling(std::move(full));
  }
  return report;
}

}  // namespace

SolveReport solve_ot(const CostMatrix& cost, const Distribution& mu, const Distribution& nu,
                     double epsilon, const SinkhornObserver& observer) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("solve_ot: epsilon must be positive");
  if (mu.size() != cost.size() || nu.size() != cost.size()) {
    throw std::invalid_argument("solve_ot: marginal size mismatch");
  }
  if (!mu.is_strictly_positive() || !nu.is_strictly_positive()) {
    return solve_ot_with_dropped_atoms(cost, mu, nu, epsilon, observer);
  }
  const int n = cost.size();
  if (n == 1) return trivial_report(cost(0, 0));

  const double cmax = cost.max_abs();
  const double scale = cmax > 0.0 ? cmax : 1.0;
  Matrix normalized(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) normalized(i, j) = cost(i, j) / scale;
  const CostMatrix cost_n(std::move(normalized));

  const double eps_scaled = epsilon / scale;
  SinkhornConfig cfg;
  cfg.eta = 4.0 * std::log(static_cast<double>(n)) / eps_scaled;
  cfg.marginal_tolerance = eps_scaled / 8.0;
  cfg.max_iterations = 100000;
  if (cfg.eta * std::numeric_limits<double>::epsilon() * 16.0 > cfg.marginal_tolerance) {
    throw std::invalid_argument(
        "solve_ot: epsilon is too small for double precision at this cost scale; "
        "rescale the costs or relax epsilon");
  }

  auto [m, inner] = run_sinkhorn(cost_n, mu, nu, cfg, observer);

  const Coupling plan = round_to_coupling(materialize(m), mu, nu);
  SolveReport report;
  report.iterations = inner.iterations;
  report.converged = inner.converged;
  report.trace = std::move(inner.trace);
  for (TraceRecord& rec : report.trace) rec.dual *= scale;
  report.value = transport_cost(plan, cost);
  report.upper_bound = report.value;
  const double dual = dual_objective(m, mu, nu);
  report.lower_bound = (dual - 2.0 * std::log(static_cast<double>(n)) / cfg.eta) * scale;
  report.certificate = plan;
  return report;
}

}  // namespace couplings
