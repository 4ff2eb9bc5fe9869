#include "couplings/log_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace couplings {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  double shift = values[0];
  for (double v : values) shift = std::max(shift, v);
  // all entries -inf: the sum is 0, its log is -inf
  if (shift == -std::numeric_limits<double>::infinity()) return shift;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - shift);
  return shift + std::log(sum);
}

double softmin(std::span<const double> values, double eta) {
  if (values.empty()) throw std::invalid_argument("softmin: empty input");
  if (!(eta > 0.0)) throw std::invalid_argument("softmin: eta must be positive");
  std::vector<double> neg(values.size());
  for (size_t i = 0; i < values.size(); ++i) neg[i] = -eta * values[i];
  return -log_sum_exp(neg) / eta;
}

LogScaledMatrix::LogScaledMatrix(std::shared_ptr<const CostMatrix> cost, double eta,
                                 ScalingMode mode)
    : cost_(std::move(cost)), eta_(eta), mode_(mode), x_(cost_->size(), 0.0) {
  if (!(eta_ > 0.0)) throw std::invalid_argument("LogScaledMatrix: eta must be positive");
  if (mode_ == ScalingMode::scaling) y_.assign(cost_->size(), 0.0);
}

LogScaledMatrix LogScaledMatrix::scaling(CostMatrix cost, double eta) {
  return LogScaledMatrix(std::make_shared<const CostMatrix>(std::move(cost)), eta,
                         ScalingMode::scaling);
}

LogScaledMatrix LogScaledMatrix::balancing(CostMatrix cost, double eta) {
  return LogScaledMatrix(std::make_shared<const CostMatrix>(std::move(cost)), eta,
                         ScalingMode::balancing);
}

std::vector<double> LogScaledMatrix::y_vector() const {
  if (mode_ == ScalingMode::scaling) return y_;
  std::vector<double> out(x_.size());
  for (size_t i = 0; i < x_.size(); ++i) out[i] = -x_[i];
  return out;
}

void LogScaledMatrix::set_x(std::vector<double> x) {
  if (static_cast<int>(x.size()) != size()) {
    throw std::invalid_argument("LogScaledMatrix::set_x: length mismatch");
  }
  x_ = std::move(x);
}

void LogScaledMatrix::set_y(std::vector<double> y) {
  if (mode_ != ScalingMode::scaling) {
    throw std::invalid_argument("LogScaledMatrix::set_y: balancing mode derives y = -x");
  }
  if (static_cast<int>(y.size()) != size()) {
    throw std::invalid_argument("LogScaledMatrix::set_y: length mismatch");
  }
  y_ = std::move(y);
}

void LogScaledMatrix::add_to_y(int j, double delta) {
  if (mode_ != ScalingMode::scaling) {
    throw std::invalid_argument("LogScaledMatrix::add_to_y: balancing mode derives y = -x");
  }
  y_[j] += delta;
}

Matrix materialize(const LogScaledMatrix& m) {
  const int n = m.size();
  Matrix out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double e = m.log_entry(i, j);
      if (e > 700.0) {
        throw std::runtime_error(
            "materialize: entry (" + std::to_string(i) + "," + std::to_string(j) +
            ") overflows (log entry " + std::to_string(e) +
            "); normalize the cost matrix to a smaller scale");
      }
      out(i, j) = std::exp(e);
    }
  return out;
}

LogMarginals log_marginals(const LogScaledMatrix& m) {
  const int n = m.size();
  LogMarginals out;
  out.log_rows.resize(n);
  out.log_cols.resize(n);
  std::vector<double> buf(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) buf[j] = m.log_entry(i, j);
    out.log_rows[i] = log_sum_exp(buf);
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) buf[i] = m.log_entry(i, j);
    out.log_cols[j] = log_sum_exp(buf);
  }
  return out;
}

double log_total_mass(const LogScaledMatrix& m) {
  const int n = m.size();
  std::vector<double> buf(static_cast<size_t>(n) * n);
  size_t k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) buf[k++] = m.log_entry(i, j);
  return log_sum_exp(buf);
}

double dual_objective(const LogScaledMatrix& m, const Distribution& mu,
                      const Distribution& nu) {
  if (m.mode() != ScalingMode::scaling) {
    throw std::invalid_argument("dual_objective: marginals supplied in balancing mode");
  }
  if (mu.size() != m.size() || nu.size() != m.size()) {
    throw std::invalid_argument("dual_objective: marginal size mismatch");
  }
  double lin = 0.0;
  for (int i = 0; i < m.size(); ++i) lin += mu[i] * m.x(i);
  for (int j = 0; j < m.size(); ++j) lin += nu[j] * m.y(j);
  return lin - log_total_mass(m) / m.eta();
}

double dual_objective(const LogScaledMatrix& m) {
  if (m.mode() != ScalingMode::balancing) {
    throw std::invalid_argument("dual_objective: scaling mode requires marginals");
  }
  return -log_total_mass(m) / m.eta();
}

}  // namespace couplings
