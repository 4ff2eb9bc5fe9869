#include "couplings/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace couplings {

Distribution::Distribution(std::vector<double> weights) : w_(std::move(weights)) {
  if (w_.empty()) throw std::invalid_argument("Distribution: must have at least one atom");
  double sum = 0.0;
  for (size_t i = 0; i < w_.size(); ++i) {
    if (!(w_[i] >= 0.0)) {
      throw std::invalid_argument("Distribution: entry " + std::to_string(i) +
                                  " is negative or NaN");
    }
    sum += w_[i];
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw std::invalid_argument("Distribution: entries must sum to 1 (got " +
                                std::to_string(sum) + ")");
  }
}

Distribution Distribution::uniform(int n) {
  if (n < 1) throw std::invalid_argument("Distribution::uniform: n must be >= 1");
  return Distribution(std::vector<double>(n, 1.0 / n));
}

bool Distribution::is_strictly_positive() const {
  return std::all_of(w_.begin(), w_.end(), [](double v) { return v > 0.0; });
}

CostMatrix::CostMatrix(Matrix entries) : m_(std::move(entries)) {
  for (int i = 0; i < m_.size(); ++i)
    for (int j = 0; j < m_.size(); ++j)
      if (!std::isfinite(m_(i, j))) {
        throw std::invalid_argument("CostMatrix: entry (" + std::to_string(i) + "," +
                                    std::to_string(j) + ") is not finite");
      }
}

Coupling::Coupling(Matrix entries) : m_(std::move(entries)) {
  double sum = 0.0;
  for (int i = 0; i < m_.size(); ++i)
    for (int j = 0; j < m_.size(); ++j) {
      if (!(m_(i, j) >= 0.0)) {
        throw std::invalid_argument("Coupling: entry (" + std::to_string(i) + "," +
                                    std::to_string(j) + ") is negative or NaN");
      }
      sum += m_(i, j);
    }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw std::invalid_argument("Coupling: total mass must be 1 (got " +
                                std::to_string(sum) + ")");
  }
}

Cycle::Cycle(std::vector<int> verts) : vertices(std::move(verts)) {
  if (vertices.empty()) throw std::invalid_argument("Cycle: must have at least one vertex");
  std::unordered_set<int> seen;
  for (int v : vertices) {
    if (v < 0) throw std::invalid_argument("Cycle: negative vertex index");
    if (!seen.insert(v).second) {
      throw std::invalid_argument("Cycle: repeated vertex " + std::to_string(v));
    }
  }
}

double cycle_mean(const CostMatrix& cost, const Cycle& cycle) {
  const int k = cycle.length();
  for (int v : cycle.vertices)
    if (v >= cost.size()) {
      throw std::invalid_argument("cycle_mean: vertex " + std::to_string(v) +
                                  " out of range for n = " + std::to_string(cost.size()));
    }
  double sum = 0.0;
  for (int t = 0; t < k; ++t) {
    sum += cost(cycle.vertices[t], cycle.vertices[(t + 1) % k]);
  }
  return sum / k;
}

std::vector<double> row_marginals(const Matrix& p) {
  const int n = p.size();
  std::vector<double> r(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r[i] += p(i, j);
  return r;
}

std::vector<double> col_marginals(const Matrix& p) {
  const int n = p.size();
  std::vector<double> c(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c[j] += p(i, j);
  return c;
}

double transport_cost(const Matrix& p, const CostMatrix& cost) {
  if (p.size() != cost.size()) {
    throw std::invalid_argument("transport_cost: dimension mismatch (" +
                                std::to_string(p.size()) + " vs " +
                                std::to_string(cost.size()) + ")");
  }
  double s = 0.0;
  for (int i = 0; i < p.size(); ++i)
    for (int j = 0; j < p.size(); ++j) s += p(i, j) * cost(i, j);
  return s;
}

double transport_cost(const Coupling& p, const CostMatrix& cost) {
  return transport_cost(p.matrix(), cost);
}

double entropy(const Matrix& p) {
  double s = 0.0;
  for (int i = 0; i < p.size(); ++i)
    for (int j = 0; j < p.size(); ++j) {
      const double v = p(i, j);
      if (v > 0.0) s += v * std::log(v);
    }
  return s;
}

double entropy(const Coupling& p) { return entropy(p.matrix()); }

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("kl_divergence: length mismatch");
  }
  double s = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
      s += p[i] * std::log(p[i] / q[i]) - p[i] + q[i];
    } else {
      s += q[i];
    }
  }
  return s;
}

double hellinger_imbalance(const std::vector<double>& r, const std::vector<double>& c) {
  if (r.size() != c.size()) {
    throw std::invalid_argument("hellinger_imbalance: length mismatch");
  }
  double s = 0.0;
  for (size_t i = 0; i < r.size(); ++i) {
    const double d = std::sqrt(r[i]) - std::sqrt(c[i]);
    s += d * d;
  }
  return s;
}

}  // namespace couplings
