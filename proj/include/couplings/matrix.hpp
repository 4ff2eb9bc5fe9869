#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace couplings {

// Dense square matrix, row-major. All problems in this library live on a
// complete n x n grid, so no sparse or rectangular storage is provided.
class Matrix {
 public:
  Matrix() = default;

  explicit Matrix(int n, double fill = 0.0) : n_(n), a_(checked_size(n), fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    const int n = static_cast<int>(rows.size());
    Matrix m(n);
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(rows[i].size()) != n) {
        throw std::invalid_argument("Matrix::from_rows: row " + std::to_string(i) +
                                    " has length " + std::to_string(rows[i].size()) +
                                    ", expected " + std::to_string(n));
      }
      for (int j = 0; j < n; ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  int size() const { return n_; }

  double& operator()(int i, int j) { return a_[static_cast<size_t>(i) * n_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * n_ + j]; }

  const std::vector<double>& data() const { return a_; }

  std::vector<std::vector<double>> to_rows() const {
    std::vector<std::vector<double>> rows(n_, std::vector<double>(n_));
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) rows[i][j] = (*this)(i, j);
    return rows;
  }

  double total() const {
    double s = 0.0;
    for (double v : a_) s += v;
    return s;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::abs(v));
    return m;
  }

  bool operator==(const Matrix& other) const = default;

 private:
  static size_t checked_size(int n) {
    if (n < 1) throw std::invalid_argument("Matrix: size must be >= 1");
    return static_cast<size_t>(n) * static_cast<size_t>(n);
  }

  int n_ = 0;
  std::vector<double> a_;
};

}  // namespace couplings
