#include "couplings/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "couplings/rng.hpp"
#include "couplings/sinkhorn.hpp"

namespace couplings {

namespace {

// Rotate so the smallest vertex comes first; cycle identity is rotation
// invariant and the canonical form makes tie-breaking reproducible.
std::vector<int> canonical_rotation(std::vector<int> cyc) {
  const auto it = std::min_element(cyc.begin(), cyc.end());
  std::rotate(cyc.begin(), it, cyc.end());
  return cyc;
}

double mean_of(const CostMatrix& cost, const std::vector<int>& cyc) {
  double sum = 0.0;
  for (size_t t = 0; t < cyc.size(); ++t) {
    sum += cost(cyc[t], cyc[(t + 1) % cyc.size()]);
  }
  return sum / static_cast<double>(cyc.size());
}

}  // namespace

MmcResult karp_mmc(const CostMatrix& cost) {
  const int n = cost.size();
  // d[k][v]: minimum cost of a length-k walk ending at v, source layer over
  // all vertices; parent[k][v] is the minimizing predecessor.
  std::vector<std::vector<double>> d(n + 1, std::vector<double>(n, 0.0));
  std::vector<std::vector<int>> parent(n + 1, std::vector<int>(n, -1));
  for (int k = 1; k <= n; ++k) {
    for (int v = 0; v < n; ++v) {
      double best = std::numeric_limits<double>::infinity();
      int best_u = 0;
      for (int u = 0; u < n; ++u) {
        const double cand = d[k - 1][u] + cost(u, v);
        if (cand < best) {
          best = cand;
          best_u = u;
        }
      }
      d[k][v] = best;
      parent[k][v] = best_u;
    }
  }

  double best_value = std::numeric_limits<double>::infinity();
  int best_v = 0;
  for (int v = 0; v < n; ++v) {
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
      worst = std::max(worst, (d[n][v] - d[k][v]) / static_cast<double>(n - k));
    }
    if (worst < best_value) {
      best_value = worst;
      best_v = v;
    }
  }

  // Walk the parent chain of the minimizing vertex through all n layers;
  // any repeated vertex on this walk bounds a minimum mean cycle.
  std::vector<int> walk(n + 1);
  walk[n] = best_v;
  for (int k = n; k >= 1; --k) walk[k - 1] = parent[k][walk[k]];

  std::vector<int> first_seen(n, -1);
  std::vector<int> cyc;
  for (int idx = 0; idx <= n; ++idx) {
    const int v = walk[idx];
    if (first_seen[v] >= 0) {
      cyc.assign(walk.begin() + first_seen[v], walk.begin() + idx);
      break;
    }
    first_seen[v] = idx;
  }

  MmcResult out{0.0, Cycle(canonical_rotation(std::move(cyc)))};
  out.value = cycle_mean(cost, out.cycle);
  return out;
}

MmcResult brute_force_mmc(const CostMatrix& cost) {
  const int n = cost.size();
  if (n > 8) {
    throw std::invalid_argument("brute_force_mmc: n = " + std::to_string(n) +
                                " exceeds the enumeration guard (n <= 8)");
  }
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<int> best_cycle;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> verts;
    for (int v = 0; v < n; ++v)
      if (mask & (1u << v)) verts.push_back(v);
    // enumerate cyclic orders with the smallest vertex pinned first
    std::vector<int> rest(verts.begin() + 1, verts.end());
    std::sort(rest.begin(), rest.end());
    do {
      std::vector<int> cyc{verts[0]};
      cyc.insert(cyc.end(), rest.begin(), rest.end());
      const double mean = mean_of(cost, cyc);
      if (mean < best_value - 1e-15 ||
          (std::abs(mean - best_value) <= 1e-15 && cyc < best_cycle)) {
        best_value = mean;
        best_cycle = cyc;
      }
    } while (std::next_permutation(rest.begin(), rest.end()));
  }
  MmcResult out{0.0, Cycle(std::move(best_cycle))};
  out.value = cycle_mean(cost, out.cycle);
  return out;
}

namespace {

constexpr double kRationalTolerance = 1e-9;

std::optional<std::vector<long>> as_integer_counts(const Distribution& d, int denominator) {
  std::vector<long> counts(d.size());
  long total = 0;
  for (int i = 0; i < d.size(); ++i) {
    const double scaled = d[i] * denominator;
    const double rounded = std::round(scaled);
    if (std::abs(scaled - rounded) > kRationalTolerance * denominator) return std::nullopt;
    counts[i] = static_cast<long>(rounded);
    total += counts[i];
  }
  if (total != denominator) return std::nullopt;
  return counts;
}

std::optional<int> common_denominator(const Distribution& mu, const Distribution& nu,
                                      int limit) {
  for (int denom = 1; denom <= limit; ++denom) {
    if (as_integer_counts(mu, denom) && as_integer_counts(nu, denom)) return denom;
  }
  return std::nullopt;
}

// Dense assignment problem by shortest augmenting paths with potentials;
// exact on int64 costs.
std::vector<int> solve_assignment(const std::vector<std::vector<std::int64_t>>& a) {
  const int n = static_cast<int>(a.size());
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  std::vector<std::int64_t> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      std::int64_t delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const std::int64_t cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  // row assigned to each column, 0-based
  std::vector<int> row_of_col(n);
  for (int j = 1; j <= n; ++j) row_of_col[j - 1] = p[j] - 1;
  return row_of_col;
}

}  // namespace

bool marginals_representable(const Distribution& mu, const Distribution& nu,
                             int denominator_limit) {
  return common_denominator(mu, nu, denominator_limit).has_value();
}

ExactOtResult exact_ot(const CostMatrix& cost, const Distribution& mu,
                       const Distribution& nu, int denominator_limit) {
  const int n = cost.size();
  if (mu.size() != n || nu.size() != n) {
    throw std::invalid_argument("exact_ot: marginal size mismatch");
  }
  if (denominator_limit < 1 || denominator_limit > 512) {
    throw std::invalid_argument("exact_ot: denominator limit must be in [1, 512]");
  }
  const std::optional<int> denom = common_denominator(mu, nu, denominator_limit);
  if (!denom) {
    throw std::invalid_argument(
        "exact_ot: marginals are not representable over a common denominator <= " +
        std::to_string(denominator_limit));
  }
  const int L = *denom;
  const std::vector<long> row_counts = *as_integer_counts(mu, L);
  const std::vector<long> col_counts = *as_integer_counts(nu, L);

  std::vector<int> row_owner, col_owner;
  row_owner.reserve(L);
  col_owner.reserve(L);
  for (int i = 0; i < n; ++i)
    for (long k = 0; k < row_counts[i]; ++k) row_owner.push_back(i);
  for (int j = 0; j < n; ++j)
    for (long k = 0; k < col_counts[j]; ++k) col_owner.push_back(j);

  // integer costs at 2^-30 resolution: reproducible comparisons, exact sums
  constexpr double kQuantum = 1073741824.0;  // 2^30
  std::vector<std::vector<std::int64_t>> a(L, std::vector<std::int64_t>(L));
  for (int p = 0; p < L; ++p)
    for (int q = 0; q < L; ++q) {
      a[p][q] = std::llround(cost(row_owner[p], col_owner[q]) * kQuantum);
    }

  const std::vector<int> row_of_col = solve_assignment(a);
  Matrix plan(n, 0.0);
  const double unit = 1.0 / static_cast<double>(L);
  for (int q = 0; q < L; ++q) {
    plan(row_owner[row_of_col[q]], col_owner[q]) += unit;
  }
  ExactOtResult out{0.0, Coupling(std::move(plan))};
  out.value = transport_cost(out.plan, cost);
  return out;
}

Coupling random_feasible_coupling(const Distribution& mu, const Distribution& nu,
                                  std::uint64_t seed) {
  if (mu.size() != nu.size()) {
    throw std::invalid_argument("random_feasible_coupling: marginal size mismatch");
  }
  if (!mu.is_strictly_positive() || !nu.is_strictly_positive()) {
    throw std::invalid_argument("random_feasible_coupling: marginals must be positive");
  }
  const int n = mu.size();
  Rng64 rng(seed);
  Matrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = rng.next_unit();
  return round_to_coupling(m, mu, nu);
}

}  // namespace couplings
