#pragma once

#include <cstdint>

#include "couplings/core.hpp"

namespace couplings {

struct MmcResult {
  double value = 0.0;
  Cycle cycle;
};

// Karp's O(n^3) dynamic program over walk lengths; exact on complete graphs.
// The certificate cycle is recovered from the parent links of the
// minimizing walk and its mean equals the returned value.
MmcResult karp_mmc(const CostMatrix& cost);

// Literal enumeration of all simple cycles; n <= 8. Ties broken toward the
// lexicographically smallest canonical vertex sequence.
MmcResult brute_force_mmc(const CostMatrix& cost);

struct ExactOtResult {
  double value = 0.0;
  Coupling plan;
};

// Exact OT by rational expansion: write mu and nu over a common denominator
// L <= denominator_limit, expand to an L x L assignment problem on integer
// costs (scaled by 2^30), solve by shortest augmenting paths, and contract
// back to a coupling.
ExactOtResult exact_ot(const CostMatrix& cost, const Distribution& mu,
                       const Distribution& nu, int denominator_limit = 512);

// True when both marginals are representable over a common denominator
// <= denominator_limit (the precondition of exact_ot).
bool marginals_representable(const Distribution& mu, const Distribution& nu,
                             int denominator_limit = 512);

// iid uniform entries rounded onto the transportation polytope;
// deterministic per seed.
Coupling random_feasible_coupling(const Distribution& mu, const Distribution& nu,
                                  std::uint64_t seed);

}  // namespace couplings
