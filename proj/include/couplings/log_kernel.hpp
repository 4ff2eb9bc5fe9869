#pragma once

#include <memory>
#include <span>
#include <vector>

#include "couplings/core.hpp"

namespace couplings {

// Max-shifted log(sum_i exp(v_i)) with summation in index order, so results
// are bitwise reproducible. Input must be nonempty and free of NaN.
double log_sum_exp(std::span<const double> values);

// smin_i a_i = -eta^-1 log sum_i exp(-eta a_i). Smooth lower approximation
// of the minimum with gap at most log(m)/eta over m terms.
double softmin(std::span<const double> values, double eta);

enum class ScalingMode { scaling, balancing };

// Implicit representation of the scaled iterate P_ij = exp(eta (x_i + y_j -
// C_ij)). In balancing mode only x is stored and y = -x by construction, so
// P = X K X^-1 entrywise with K = exp[-eta C]. The matrix K is never formed;
// every query works off log-entries.
class LogScaledMatrix {
 public:
  static LogScaledMatrix scaling(CostMatrix cost, double eta);
  static LogScaledMatrix balancing(CostMatrix cost, double eta);

  int size() const { return cost_->size(); }
  double eta() const { return eta_; }
  ScalingMode mode() const { return mode_; }
  const CostMatrix& cost() const { return *cost_; }

  const std::vector<double>& x() const { return x_; }
  double x(int i) const { return x_[i]; }
  double y(int j) const { return mode_ == ScalingMode::balancing ? -x_[j] : y_[j]; }
  std::vector<double> y_vector() const;

  // eta * (x_i + y_j - C_ij), i.e. log of the represented entry.
  double log_entry(int i, int j) const {
    return eta_ * (x_[i] + y(j) - (*cost_)(i, j));
  }

  void set_x(std::vector<double> x);
  void set_y(std::vector<double> y);  // scaling mode only
  void add_to_x(int i, double delta) { x_[i] += delta; }
  void add_to_y(int j, double delta);

 private:
  LogScaledMatrix(std::shared_ptr<const CostMatrix> cost, double eta, ScalingMode mode);

  std::shared_ptr<const CostMatrix> cost_;
  double eta_ = 1.0;
  ScalingMode mode_ = ScalingMode::scaling;
  std::vector<double> x_;
  std::vector<double> y_;  // empty in balancing mode
};

// Explicit entries of the represented matrix. For reporting and tests only;
// throws if any exponent exceeds the double range (log entry > 700).
Matrix materialize(const LogScaledMatrix& m);

struct LogMarginals {
  std::vector<double> log_rows;
  std::vector<double> log_cols;
};

// Per-row / per-column log-sum-exp of the represented entries.
LogMarginals log_marginals(const LogScaledMatrix& m);

// log of the total represented mass, via one log-sum-exp over all n^2
// entries in row-major order.
double log_total_mass(const LogScaledMatrix& m);

// Scaling-mode dual objective <mu,x> + <nu,y> + smin_ij (C_ij - x_i - y_j).
double dual_objective(const LogScaledMatrix& m, const Distribution& mu,
                      const Distribution& nu);

// Balancing-mode dual objective smin_ij (C_ij - x_i + x_j), which equals
// -eta^-1 log of the total represented mass.
double dual_objective(const LogScaledMatrix& m);

}  // namespace couplings
