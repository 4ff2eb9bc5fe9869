#include <cmath>

#include "couplings/instance_io.hpp"
#include "couplings/oracles.hpp"
#include "couplings/osborne.hpp"
#include "couplings/sinkhorn.hpp"
#include "doctest.h"

using namespace couplings;

TEST_CASE("uniform generator is deterministic and kind-aware") {
  const ProblemInstance a = gen_uniform_cost(ProblemKind::ot, 6, 42);
  const ProblemInstance b = gen_uniform_cost(ProblemKind::ot, 6, 42);
  CHECK(write_instance(a) == write_instance(b));
  CHECK(a.mu.has_value());
  CHECK(a.nu.has_value());
  CHECK(a.metadata.at("prng") == "mt19937_64-u53");

  const ProblemInstance c = gen_uniform_cost(ProblemKind::mmc, 6, 42);
  CHECK_FALSE(c.mu.has_value());
  CHECK(c.cost.matrix() == a.cost.matrix());

  const ProblemInstance tiny = gen_uniform_cost(ProblemKind::mmc, 1, 0);
  CHECK(tiny.cost.size() == 1);

  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      CHECK(a.cost(i, j) >= 0.0);
      CHECK(a.cost(i, j) < 1.0);
    }
}

TEST_CASE("near-constant costs give a hairline MMC bracket") {
  const ProblemInstance inst = gen_uniform_cost(ProblemKind::mmc, 5, 3, 1.0 - 1e-9, 1.0);
  const SolveReport report = solve_mmc(inst.cost, 0.05);
  CHECK(report.converged);
  CHECK(report.upper_bound - report.lower_bound <= 1e-9);
}

TEST_CASE("euclidean cost construction") {
  SUBCASE("identical clouds put zero on the diagonal and transport for free") {
    const std::vector<std::vector<double>> pts{{0.1, 0.4}, {0.9, 0.2}, {0.5, 0.7}};
    const CostMatrix c(euclidean_cost(pts, pts, 2.0));
    for (int i = 0; i < 3; ++i) CHECK(c(i, i) == 0.0);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(c(i, j) == doctest::Approx(c(j, i)).epsilon(1e-15));
    const ExactOtResult r = exact_ot(c, Distribution::uniform(3), Distribution::uniform(3));
    CHECK(r.value == 0.0);
  }

  SUBCASE("line translation moves every unit of mass by t") {
    const std::vector<std::vector<double>> a{{0.0}, {1.0}};
    const double t = 0.125;
    const std::vector<std::vector<double>> b{{0.0 + t}, {1.0 + t}};
    CHECK(exact_ot(CostMatrix(euclidean_cost(a, a, 1.0)), Distribution::uniform(2),
                   Distribution::uniform(2))
              .value == 0.0);
    CHECK(exact_ot(CostMatrix(euclidean_cost(a, b, 1.0)), Distribution::uniform(2),
                   Distribution::uniform(2))
              .value == doctest::Approx(t).epsilon(1e-12));
  }

  SUBCASE("generated instance solves within epsilon of the oracle") {
    const ProblemInstance inst = gen_euclidean_ot(16, 2, 2.0, 7);
    const SolveReport report = solve_ot(inst.cost, *inst.mu, *inst.nu, 0.05);
    const ExactOtResult exact = exact_ot(inst.cost, *inst.mu, *inst.nu);
    CHECK(std::abs(report.value - exact.value) <= 0.05);
  }
}

TEST_CASE("instance documents round-trip") {
  const ProblemInstance inst = gen_euclidean_ot(5, 3, 1.5, 11);
  const std::string text = write_instance(inst);
  const ProblemInstance back = parse_instance(text);
  CHECK(write_instance(back) == text);
  CHECK(back.kind == inst.kind);
  CHECK(back.cost.matrix() == inst.cost.matrix());
  CHECK(back.mu->weights() == inst.mu->weights());
  CHECK(back.metadata == inst.metadata);

  const ProblemInstance balance = gen_uniform_cost(ProblemKind::balance, 4, 5);
  CHECK(write_instance(parse_instance(write_instance(balance))) == write_instance(balance));
}

TEST_CASE("instance validation names the offending field") {
  CHECK_THROWS_WITH_AS(parse_instance("{"), doctest::Contains("malformed"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      parse_instance(R"({"version": 1, "kind": "mmc", "n": 2})"),
      doctest::Contains("cost"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      parse_instance(
          R"({"version": 1, "kind": "ot", "n": 2, "cost": [[0, 1], [1, 0]],
              "mu": [0.5, 0.4], "nu": [0.5, 0.5]})"),
      doctest::Contains("sum to 1"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      parse_instance(
          R"({"version": 1, "kind": "ot", "n": 2, "cost": [[0, 1], [1, 0]],
              "nu": [0.5, 0.5]})"),
      doctest::Contains("mu"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      parse_instance(
          R"({"version": 1, "kind": "mmc", "n": 2, "cost": [[0, 1], [1, 0]],
              "mu": [0.5, 0.5]})"),
      doctest::Contains("does not accept"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      parse_instance(
          R"({"version": 1, "kind": "mmc", "n": 2, "cost": [[0, 1], [1, 0]], "bogus": 3})"),
      doctest::Contains("bogus"), std::invalid_argument);
}

TEST_CASE("report documents round-trip") {
  const ProblemInstance inst = gen_uniform_cost(ProblemKind::mmc, 6, 2);
  ReportDocument doc;
  doc.kind = ProblemKind::mmc;
  doc.report = solve_mmc(inst.cost, 0.05);
  doc.oracle_value = karp_mmc(inst.cost).value;
  doc.abs_gap = std::abs(doc.report.value - *doc.oracle_value);
  const std::string text = write_report(doc);
  const ReportDocument back = parse_report(text);
  CHECK(write_report(back) == text);
  CHECK(back.report.iterations == doc.report.iterations);
  CHECK(back.report.trace.size() == doc.report.trace.size());
  CHECK(std::get<Cycle>(back.report.certificate).vertices ==
        std::get<Cycle>(doc.report.certificate).vertices);

  // coupling certificates and kl columns survive as well
  const ProblemInstance ot = gen_uniform_cost(ProblemKind::ot, 4, 9);
  ReportDocument doc2;
  doc2.kind = ProblemKind::ot;
  doc2.report = solve_ot(ot.cost, *ot.mu, *ot.nu, 0.1);
  const std::string text2 = write_report(doc2);
  CHECK(write_report(parse_report(text2)) == text2);

  CHECK_THROWS_WITH_AS(parse_report(R"({"version": 1, "kind": "ot"})"),
                       doctest::Contains("value"), std::invalid_argument);
}

TEST_CASE("csv matrix import") {
  const Matrix m = parse_csv_matrix("0.5,1.25\n-3e-2,4\n");
  CHECK(m.size() == 2);
  CHECK(m(0, 1) == 1.25);
  CHECK(m(1, 0) == -0.03);
  CHECK_THROWS_AS(parse_csv_matrix("1,2\n3\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_csv_matrix("1,x\n3,4\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_csv_matrix(""), std::invalid_argument);
}

TEST_CASE("trace csv formatting") {
  SolveReport report;
  report.trace.push_back({0, -1.0, 0.5, 0.25, 0.125});
  report.trace.push_back({1, -0.5, 0.25, 0.1, 0.05});
  const std::string with_kl = write_trace_csv(report, true);
  CHECK(with_kl.starts_with("iter,dual,imbalance,kl_row,kl_col\n"));
  CHECK(with_kl.find("0,-1,0.5,0.25,0.125\n") != std::string::npos);
  const std::string without = write_trace_csv(report, false);
  CHECK(without.starts_with("iter,dual,imbalance\n"));
  CHECK(without.find("kl") == std::string::npos);
}

TEST_CASE("generator specs") {
  const ProblemInstance a = parse_generator_spec("uniform:n=4,seed=3", ProblemKind::mmc);
  CHECK(a.kind == ProblemKind::mmc);
  CHECK(a.cost.matrix() == gen_uniform_cost(ProblemKind::mmc, 4, 3).cost.matrix());

  const ProblemInstance b =
      parse_generator_spec("euclidean:n=8,d=2,p=2,seed=1", ProblemKind::ot);
  CHECK(b.mu.has_value());
  CHECK(b.cost.size() == 8);

  CHECK_THROWS_WITH_AS(parse_generator_spec("uniform:n=4,seed=3,bogus=1", ProblemKind::mmc),
                       doctest::Contains("bogus"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_generator_spec("uniform:n=4", ProblemKind::mmc),
                       doctest::Contains("seed"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_generator_spec("mystery:n=4", ProblemKind::mmc),
                       doctest::Contains("mystery"), std::invalid_argument);
  CHECK_THROWS_AS(parse_generator_spec("uniform:n=4,seed=1,lo=2,hi=1", ProblemKind::mmc),
                  std::invalid_argument);
}
