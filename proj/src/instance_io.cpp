#include "couplings/instance_io.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "couplings/rng.hpp"
#include "json.hpp"

namespace couplings {

using nlohmann::json;

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::ot: return "ot";
    case ProblemKind::mmc: return "mmc";
    case ProblemKind::scale: return "scale";
    case ProblemKind::balance: return "balance";
  }
  throw std::invalid_argument("to_string: unknown ProblemKind");
}

ProblemKind kind_from_string(const std::string& s) {
  if (s == "ot") return ProblemKind::ot;
  if (s == "mmc") return ProblemKind::mmc;
  if (s == "scale") return ProblemKind::scale;
  if (s == "balance") return ProblemKind::balance;
  throw std::invalid_argument("kind: expected one of ot|mmc|scale|balance, got '" + s + "'");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

bool kind_has_marginals(ProblemKind kind) {
  return kind == ProblemKind::ot || kind == ProblemKind::scale;
}

}  // namespace

ProblemInstance gen_uniform_cost(ProblemKind kind, int n, std::uint64_t seed, double lo,
                                 double hi) {
  if (n < 1) throw std::invalid_argument("gen_uniform_cost: n must be >= 1");
  if (!(lo < hi)) throw std::invalid_argument("gen_uniform_cost: need lo < hi");
  Rng64 rng(seed);
  Matrix c(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c(i, j) = rng.next_uniform(lo, hi);
  ProblemInstance inst{kind, CostMatrix(std::move(c)), std::nullopt, std::nullopt, {}};
  if (kind_has_marginals(kind)) {
    inst.mu = Distribution::uniform(n);
    inst.nu = Distribution::uniform(n);
  }
  inst.metadata = {{"generator", "uniform"},
                   {"n", std::to_string(n)},
                   {"seed", std::to_string(seed)},
                   {"lo", format_double(lo)},
                   {"hi", format_double(hi)},
                   {"prng", kRngName}};
  return inst;
}

Matrix euclidean_cost(const std::vector<std::vector<double>>& a,
                      const std::vector<std::vector<double>>& b, double p) {
  const int n = static_cast<int>(a.size());
  if (static_cast<int>(b.size()) != n || n < 1) {
    throw std::invalid_argument("euclidean_cost: point clouds must have equal nonzero size");
  }
  if (!(p >= 1.0)) throw std::invalid_argument("euclidean_cost: p must be >= 1");
  Matrix c(n);
  for (int i = 0; i < n; ++i) {
    if (a[i].size() != a[0].size() || b[i].size() != a[0].size()) {
      throw std::invalid_argument("euclidean_cost: inconsistent point dimensions");
    }
    for (int j = 0; j < n; ++j) {
      double ss = 0.0;
      for (size_t k = 0; k < a[i].size(); ++k) {
        const double d = a[i][k] - b[j][k];
        ss += d * d;
      }
      if (p == 2.0) c(i, j) = ss;
      else if (p == 1.0) c(i, j) = std::sqrt(ss);
      else c(i, j) = std::pow(ss, p / 2.0);
    }
  }
  return c;
}

namespace {

std::string encode_points(const std::vector<std::vector<double>>& pts) {
  std::string out;
  for (size_t i = 0; i < pts.size(); ++i) {
    if (i) out += ';';
    for (size_t k = 0; k < pts[i].size(); ++k) {
      if (k) out += ' ';
      out += format_double(pts[i][k]);
    }
  }
  return out;
}

}  // namespace

ProblemInstance gen_euclidean_ot(int n, int d, double p, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_euclidean_ot: n must be >= 1");
  if (d < 1) throw std::invalid_argument("gen_euclidean_ot: d must be >= 1");
  if (!(p >= 1.0)) throw std::invalid_argument("gen_euclidean_ot: p must be >= 1");
  Rng64 rng(seed);
  std::vector<std::vector<double>> a(n, std::vector<double>(d)), b(n, std::vector<double>(d));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) a[i][k] = rng.next_unit();
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) b[i][k] = rng.next_unit();

  ProblemInstance inst{ProblemKind::ot, CostMatrix(euclidean_cost(a, b, p)),
                       Distribution::uniform(n), Distribution::uniform(n), {}};
  inst.metadata = {{"generator", "euclidean"},
                   {"n", std::to_string(n)},
                   {"d", std::to_string(d)},
                   {"p", format_double(p)},
                   {"seed", std::to_string(seed)},
                   {"prng", kRngName},
                   {"points_a", encode_points(a)},
                   {"points_b", encode_points(b)}};
  return inst;
}

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.size(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.size(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& field, int n) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    throw std::invalid_argument("field '" + field + "': expected an array of " +
                                std::to_string(n) + " rows");
  }
  Matrix m(n);
  for (int i = 0; i < n; ++i) {
    const json& row = j[i];
    if (!row.is_array() || static_cast<int>(row.size()) != n) {
      throw std::invalid_argument("field '" + field + "': row " + std::to_string(i) +
                                  " must be an array of " + std::to_string(n) + " numbers");
    }
    for (int j2 = 0; j2 < n; ++j2) {
      if (!row[j2].is_number()) {
        throw std::invalid_argument("field '" + field + "': entry (" + std::to_string(i) +
                                    "," + std::to_string(j2) + ") is not a number");
      }
      m(i, j2) = row[j2].get<double>();
    }
  }
  return m;
}

std::vector<double> vector_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) {
    throw std::invalid_argument("field '" + field + "': expected an array");
  }
  std::vector<double> out;
  out.reserve(j.size());
  for (const json& v : j) {
    if (!v.is_number()) {
      throw std::invalid_argument("field '" + field + "': entries must be numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

const json& require_field(const json& j, const std::string& field) {
  const auto it = j.find(field);
  if (it == j.end()) {
    throw std::invalid_argument("missing required field '" + field + "'");
  }
  return *it;
}

json parse_document(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed document: ") + e.what());
  }
}

void check_known_fields(const json& j, std::initializer_list<const char*> known) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok) throw std::invalid_argument("unknown field '" + it.key() + "'");
  }
}

}  // namespace

std::string write_instance(const ProblemInstance& inst) {
  json j;
  j["version"] = 1;
  j["kind"] = to_string(inst.kind);
  j["n"] = inst.cost.size();
  j["cost"] = matrix_to_json(inst.cost.matrix());
  if (inst.mu) j["mu"] = inst.mu->weights();
  if (inst.nu) j["nu"] = inst.nu->weights();
  if (!inst.metadata.empty()) j["metadata"] = inst.metadata;
  return j.dump(2) + "\n";
}

ProblemInstance parse_instance(const std::string& text) {
  const json j = parse_document(text);
  if (!j.is_object()) throw std::invalid_argument("instance document must be an object");
  check_known_fields(j, {"version", "kind", "n", "cost", "mu", "nu", "metadata"});
  if (require_field(j, "version").get<int>() != 1) {
    throw std::invalid_argument("field 'version': unsupported version");
  }
  const ProblemKind kind = kind_from_string(require_field(j, "kind").get<std::string>());
  const json& jn = require_field(j, "n");
  if (!jn.is_number_integer() || jn.get<int>() < 1) {
    throw std::invalid_argument("field 'n': must be a positive integer");
  }
  const int n = jn.get<int>();

  CostMatrix cost = [&] {
    try {
      return CostMatrix(matrix_from_json(require_field(j, "cost"), "cost", n));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string("field 'cost': ") + e.what());
    }
  }();

  ProblemInstance inst{kind, std::move(cost), std::nullopt, std::nullopt, {}};
  const bool needs_marginals = kind_has_marginals(kind);
  for (const char* field : {"mu", "nu"}) {
    const auto it = j.find(field);
    if (needs_marginals && it == j.end()) {
      throw std::invalid_argument("kind '" + to_string(kind) + "' requires field '" +
                                  field + "'");
    }
    if (!needs_marginals && it != j.end()) {
      throw std::invalid_argument("kind '" + to_string(kind) + "' does not accept field '" +
                                  field + "'");
    }
    if (it == j.end()) continue;
    std::vector<double> w = vector_from_json(*it, field);
    if (static_cast<int>(w.size()) != n) {
      throw std::invalid_argument("field '" + std::string(field) + "': expected " +
                                  std::to_string(n) + " entries");
    }
    try {
      Distribution d(std::move(w));
      if (std::string(field) == "mu") inst.mu = std::move(d);
      else inst.nu = std::move(d);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("field '" + std::string(field) + "': " + e.what());
    }
  }

  if (const auto it = j.find("metadata"); it != j.end()) {
    if (!it->is_object()) throw std::invalid_argument("field 'metadata': expected an object");
    for (auto kv = it->begin(); kv != it->end(); ++kv) {
      if (!kv.value().is_string()) {
        throw std::invalid_argument("field 'metadata': values must be strings");
      }
      inst.metadata[kv.key()] = kv.value().get<std::string>();
    }
  }
  return inst;
}

std::string write_report(const ReportDocument& doc) {
  json j;
  j["version"] = 1;
  j["kind"] = to_string(doc.kind);
  j["value"] = doc.report.value;
  j["lower_bound"] = doc.report.lower_bound;
  j["upper_bound"] = doc.report.upper_bound;
  j["iterations"] = doc.report.iterations;
  j["converged"] = doc.report.converged;
  if (const Coupling* c = std::get_if<Coupling>(&doc.report.certificate)) {
    j["certificate"] = matrix_to_json(c->matrix());
  } else if (const Cycle* cy = std::get_if<Cycle>(&doc.report.certificate)) {
    j["certificate"] = cy->vertices;
  }
  json trace = json::array();
  for (const TraceRecord& rec : doc.report.trace) {
    json r;
    r["iter"] = rec.iter;
    r["dual"] = rec.dual;
    r["imbalance"] = rec.imbalance;
    if (std::isfinite(rec.kl_row)) r["kl_row"] = rec.kl_row;
    if (std::isfinite(rec.kl_col)) r["kl_col"] = rec.kl_col;
    trace.push_back(std::move(r));
  }
  j["trace"] = std::move(trace);
  if (doc.oracle_value) j["oracle_value"] = *doc.oracle_value;
  if (doc.abs_gap) j["abs_gap"] = *doc.abs_gap;
  if (doc.potentials_x) j["potentials_x"] = *doc.potentials_x;
  if (doc.potentials_y) j["potentials_y"] = *doc.potentials_y;
  if (doc.final_marginal_error) j["final_marginal_error"] = *doc.final_marginal_error;
  if (doc.final_imbalance) j["final_imbalance"] = *doc.final_imbalance;
  return j.dump(2) + "\n";
}

ReportDocument parse_report(const std::string& text) {
  const json j = parse_document(text);
  if (!j.is_object()) throw std::invalid_argument("report document must be an object");
  check_known_fields(j, {"version", "kind", "value", "lower_bound", "upper_bound",
                         "iterations", "converged", "certificate", "trace", "oracle_value",
                         "abs_gap", "potentials_x", "potentials_y", "final_marginal_error",
                         "final_imbalance"});
  if (require_field(j, "version").get<int>() != 1) {
    throw std::invalid_argument("field 'version': unsupported version");
  }
  ReportDocument doc;
  doc.kind = kind_from_string(require_field(j, "kind").get<std::string>());
  doc.report.value = require_field(j, "value").get<double>();
  doc.report.lower_bound = require_field(j, "lower_bound").get<double>();
  doc.report.upper_bound = require_field(j, "upper_bound").get<double>();
  doc.report.iterations = require_field(j, "iterations").get<long>();
  doc.report.converged = require_field(j, "converged").get<bool>();
  if (doc.report.lower_bound > doc.report.upper_bound) {
    throw std::invalid_argument("field 'lower_bound': exceeds upper_bound");
  }

  if (const auto it = j.find("certificate"); it != j.end()) {
    if (!it->is_array() || it->empty()) {
      throw std::invalid_argument("field 'certificate': expected a nonempty array");
    }
    if ((*it)[0].is_array()) {
      const int n = static_cast<int>(it->size());
      doc.report.certificate = Coupling(matrix_from_json(*it, "certificate", n));
    } else {
      std::vector<int> verts;
      for (const json& v : *it) {
        if (!v.is_number_integer()) {
          throw std::invalid_argument("field 'certificate': cycle vertices must be integers");
        }
        verts.push_back(v.get<int>());
      }
      doc.report.certificate = Cycle(std::move(verts));
    }
  }

  const json& jt = require_field(j, "trace");
  if (!jt.is_array()) throw std::invalid_argument("field 'trace': expected an array");
  for (const json& r : jt) {
    TraceRecord rec;
    rec.iter = require_field(r, "iter").get<long>();
    rec.dual = require_field(r, "dual").get<double>();
    rec.imbalance = require_field(r, "imbalance").get<double>();
    if (const auto kit = r.find("kl_row"); kit != r.end()) rec.kl_row = kit->get<double>();
    if (const auto kit = r.find("kl_col"); kit != r.end()) rec.kl_col = kit->get<double>();
    doc.report.trace.push_back(rec);
  }

  if (const auto it = j.find("oracle_value"); it != j.end()) doc.oracle_value = it->get<double>();
  if (const auto it = j.find("abs_gap"); it != j.end()) doc.abs_gap = it->get<double>();
  if (const auto it = j.find("potentials_x"); it != j.end()) {
    doc.potentials_x = vector_from_json(*it, "potentials_x");
  }
  if (const auto it = j.find("potentials_y"); it != j.end()) {
    doc.potentials_y = vector_from_json(*it, "potentials_y");
  }
  if (const auto it = j.find("final_marginal_error"); it != j.end()) {
    doc.final_marginal_error = it->get<double>();
  }
  if (const auto it = j.find("final_imbalance"); it != j.end()) {
    doc.final_imbalance = it->get<double>();
  }
  return doc;
}

Matrix parse_csv_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      size_t consumed = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &consumed);
      } catch (const std::exception&) {
        throw std::invalid_argument("csv: line " + std::to_string(lineno) +
                                    ": not a number: '" + cell + "'");
      }
      while (consumed < cell.size() && std::isspace(static_cast<unsigned char>(cell[consumed])))
        ++consumed;
      if (consumed != cell.size()) {
        throw std::invalid_argument("csv: line " + std::to_string(lineno) +
                                    ": trailing characters in '" + cell + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("csv: empty document");
  return Matrix::from_rows(rows);
}

std::string write_trace_csv(const SolveReport& report, bool include_kl) {
  std::string out = include_kl ? "iter,dual,imbalance,kl_row,kl_col\n" : "iter,dual,imbalance\n";
  for (const TraceRecord& rec : report.trace) {
    out += std::to_string(rec.iter);
    out += ',';
    out += format_double(rec.dual);
    out += ',';
    out += format_double(rec.imbalance);
    if (include_kl) {
      out += ',';
      out += format_double(rec.kl_row);
      out += ',';
      out += format_double(rec.kl_col);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::map<std::string, std::string> parse_spec_keys(const std::string& body) {
  std::map<std::string, std::string> kv;
  std::istringstream parts(body);
  std::string part;
  while (std::getline(parts, part, ',')) {
    const size_t eq = part.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::invalid_argument("generator spec: expected key=val, got '" + part + "'");
    }
    const std::string key = part.substr(0, eq);
    if (kv.count(key)) throw std::invalid_argument("generator spec: duplicate key '" + key + "'");
    kv[key] = part.substr(eq + 1);
  }
  return kv;
}

long spec_long(std::map<std::string, std::string>& kv, const std::string& key, bool required,
               long fallback = 0) {
  const auto it = kv.find(key);
  if (it == kv.end()) {
    if (required) throw std::invalid_argument("generator spec: missing key '" + key + "'");
    return fallback;
  }
  size_t consumed = 0;
  long v = 0;
  try {
    v = std::stol(it->second, &consumed);
  } catch (const std::exception&) {
    throw std::invalid_argument("generator spec: key '" + key + "': not an integer");
  }
  if (consumed != it->second.size()) {
    throw std::invalid_argument("generator spec: key '" + key + "': not an integer");
  }
  kv.erase(it);
  return v;
}

double spec_double(std::map<std::string, std::string>& kv, const std::string& key,
                   bool required, double fallback = 0.0) {
  const auto it = kv.find(key);
  if (it == kv.end()) {
    if (required) throw std::invalid_argument("generator spec: missing key '" + key + "'");
    return fallback;
  }
  size_t consumed = 0;
  double v = 0.0;
  try {
    v = std::stod(it->second, &consumed);
  } catch (const std::exception&) {
    throw std::invalid_argument("generator spec: key '" + key + "': not a number");
  }
  if (consumed != it->second.size()) {
    throw std::invalid_argument("generator spec: key '" + key + "': not a number");
  }
  kv.erase(it);
  return v;
}

void reject_leftover_keys(const std::map<std::string, std::string>& kv) {
  if (!kv.empty()) {
    throw std::invalid_argument("generator spec: unknown key '" + kv.begin()->first + "'");
  }
}

}  // namespace

ProblemInstance parse_generator_spec(const std::string& spec, ProblemKind kind) {
  const size_t colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  std::map<std::string, std::string> kv =
      colon == std::string::npos ? std::map<std::string, std::string>{}
                                 : parse_spec_keys(spec.substr(colon + 1));
  if (name == "uniform") {
    const long n = spec_long(kv, "n", true);
    const long seed = spec_long(kv, "seed", true);
    const double lo = spec_double(kv, "lo", false, 0.0);
    const double hi = spec_double(kv, "hi", false, 1.0);
    reject_leftover_keys(kv);
    return gen_uniform_cost(kind, static_cast<int>(n), static_cast<std::uint64_t>(seed), lo, hi);
  }
  if (name == "euclidean") {
    const long n = spec_long(kv, "n", true);
    const long d = spec_long(kv, "d", true);
    const double p = spec_double(kv, "p", true);
    const long seed = spec_long(kv, "seed", true);
    reject_leftover_keys(kv);
    ProblemInstance inst = gen_euclidean_ot(static_cast<int>(n), static_cast<int>(d), p,
                                            static_cast<std::uint64_t>(seed));
    if (!kind_has_marginals(kind)) {
      inst.mu.reset();
      inst.nu.reset();
    }
    inst.kind = kind;
    return inst;
  }
  throw std::invalid_argument("generator spec: unknown generator '" + name + "'");
}

}  // namespace couplings
