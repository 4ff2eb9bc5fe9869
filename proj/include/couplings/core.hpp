#pragma once

#include <limits>
#include <variant>
#include <vector>

#include "couplings/matrix.hpp"

namespace couplings {

// Absolute tolerance for mass/normalization checks throughout the library.
inline constexpr double kSumTolerance = 1e-12;

// Probability vector on n atoms: nonnegative entries summing to 1.
class Distribution {
 public:
  explicit Distribution(std::vector<double> weights);

  static Distribution uniform(int n);

  int size() const { return static_cast<int>(w_.size()); }
  double operator[](int i) const { return w_[i]; }
  const std::vector<double>& weights() const { return w_; }
  bool is_strictly_positive() const;

 private:
  std::vector<double> w_;
};

// Dense cost matrix over the complete directed graph; every entry finite.
class CostMatrix {
 public:
  explicit CostMatrix(Matrix entries);

  int size() const { return m_.size(); }
  double operator()(int i, int j) const { return m_(i, j); }
  const Matrix& matrix() const { return m_; }
  double max_abs() const { return m_.max_abs(); }

 private:
  Matrix m_;
};

// Joint distribution on n x n atoms: nonnegative entries with total mass 1.
class Coupling {
 public:
  explicit Coupling(Matrix entries);

  int size() const { return m_.size(); }
  double operator()(int i, int j) const { return m_(i, j); }
  const Matrix& matrix() const { return m_; }

 private:
  Matrix m_;
};

// Simple directed cycle given by its vertex sequence; a single vertex is a
// self-loop. The edge (back(), front()) closes the cycle.
struct Cycle {
  explicit Cycle(std::vector<int> vertices);

  int length() const { return static_cast<int>(vertices.size()); }

  std::vector<int> vertices;
};

// (sum of costs along the cycle's edges) / (cycle length)
double cycle_mean(const CostMatrix& cost, const Cycle& cycle);

struct TraceRecord {
  long iter = 0;
  double dual = 0.0;
  double imbalance = 0.0;
  // Sinkhorn traces additionally carry the marginal KL divergences; NaN
  // when the solver does not measure them.
  double kl_row = std::numeric_limits<double>::quiet_NaN();
  double kl_col = std::numeric_limits<double>::quiet_NaN();
};

struct SolveReport {
  double value = 0.0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  long iterations = 0;
  bool converged = false;
  std::vector<TraceRecord> trace;
  std::variant<std::monostate, Coupling, Cycle> certificate;
};

std::vector<double> row_marginals(const Matrix& p);
std::vector<double> col_marginals(const Matrix& p);

// <P, C> = sum_ij P_ij C_ij
double transport_cost(const Matrix& p, const CostMatrix& cost);
double transport_cost(const Coupling& p, const CostMatrix& cost);

// Sum_ij P_ij log P_ij with the convention 0 log 0 = 0. Note the sign: this
// is nonpositive, and the entropic objective is transport_cost(P, C) +
// eta^-1 * entropy(P), which penalizes concentrated couplings.
double entropy(const Matrix& p);
double entropy(const Coupling& p);

// Generalized KL divergence sum_i p_i log(p_i / q_i) - sum p + sum q, valid
// for unnormalized nonnegative vectors. Returns +infinity when p puts mass
// where q has none.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

// Hellinger-style imbalance sum_i (sqrt(r_i) - sqrt(c_i))^2.
double hellinger_imbalance(const std::vector<double>& r, const std::vector<double>& c);

}  // namespace couplings
