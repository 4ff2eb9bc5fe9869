#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "couplings/core.hpp"

namespace couplings {

enum class ProblemKind { ot, mmc, scale, balance };

std::string to_string(ProblemKind kind);
ProblemKind kind_from_string(const std::string& s);

// A solvable instance: cost matrix plus kind-dependent marginals. Metadata
// records the generator and its parameters so instances can be regenerated
// bit-exactly.
struct ProblemInstance {
  ProblemKind kind = ProblemKind::ot;
  CostMatrix cost;
  std::optional<Distribution> mu;
  std::optional<Distribution> nu;
  std::map<std::string, std::string> metadata;
};

// C entries iid uniform [lo, hi). Kinds ot and scale carry uniform
// marginals (denominator n, so exactly representable for the oracle).
ProblemInstance gen_uniform_cost(ProblemKind kind, int n, std::uint64_t seed, double lo = 0.0,
                                 double hi = 1.0);

// C_ij = ||a_i - b_j||_2^p for two iid uniform point clouds in [0, 1]^d;
// an OT instance with uniform marginals. The clouds are kept in metadata.
ProblemInstance gen_euclidean_ot(int n, int d, double p, std::uint64_t seed);

// Cost matrix of pairwise p-th power Euclidean distances between point rows.
Matrix euclidean_cost(const std::vector<std::vector<double>>& a,
                      const std::vector<std::vector<double>>& b, double p);

std::string write_instance(const ProblemInstance& inst);
ProblemInstance parse_instance(const std::string& text);

struct ReportDocument {
  ProblemKind kind = ProblemKind::ot;
  SolveReport report;
  std::optional<double> oracle_value;
  std::optional<double> abs_gap;
  std::optional<std::vector<double>> potentials_x;
  std::optional<std::vector<double>> potentials_y;
  std::optional<double> final_marginal_error;  // scale reports
  std::optional<double> final_imbalance;       // balance reports
};

std::string write_report(const ReportDocument& doc);
ReportDocument parse_report(const std::string& text);

// n lines of n comma-separated decimals, no header.
Matrix parse_csv_matrix(const std::string& text);

// Per-iteration trace as CSV; the kl columns are appended only when
// include_kl is set (OT traces).
std::string write_trace_csv(const SolveReport& report, bool include_kl);

// "name:key=val,key=val" generator specs; unknown names or keys are errors.
// The kind selects which marginals the produced instance carries.
ProblemInstance parse_generator_spec(const std::string& spec, ProblemKind kind);

// Shortest decimal form that round-trips a double (17 significant digits).
std::string format_double(double v);

}  // namespace couplings
