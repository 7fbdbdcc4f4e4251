#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "helpers.hpp"
#include "urank/bounds.hpp"

using namespace urank;
using urank::testing::TempDir;

namespace {

BoundSnapshot hand_snapshot() {
  BoundSnapshot snap;
  snap.query_id = "hand";
  snap.epoch = 1;
  snap.sigma = 1.0;
  snap.score_bound = 5.0;
  snap.table = UtilityTable::zeros(2, 2);
  snap.table.cell(0, 1) = 0.5;
  snap.table.cell(0, 2) = 0.2;
  snap.table.cell(1, 1) = 0.4;
  snap.table.cell(1, 2) = 0.1;
  snap.scores = {1.0, -1.0};
  snap.positions = {1, 2};
  return snap;
}

}  // namespace

TEST_SUITE("bounds") {

TEST_CASE("c1 constant") {
  // log2(1 + e^{2 sigma C}) once it exceeds the floor of 2.
  CHECK(bound_c1(1.0, 5.0) == doctest::Approx(14.427015905656397).epsilon(1e-12));
  CHECK(bound_c1(1.0, 0.1) == 2.0);
  CHECK(bound_c1(0.5, 2.0) == doctest::Approx(std::log2(1.0 + std::exp(2.0))));
  // Overflow-free for huge exponents: ~ 2 sigma C / ln 2.
  CHECK(bound_c1(10.0, 400.0) == doctest::Approx(8000.0 * 1.4426950408889634).epsilon(1e-9));
}

TEST_CASE("hand-checked snapshot") {
  const BoundCheck c = verify_bound_snapshot(hand_snapshot());
  CHECK(c.query_id == "hand");
  CHECK(c.monotone);
  CHECK_FALSE(c.score_ties);
  CHECK(c.checked);
  CHECK_FALSE(c.violated);
  // Both assignments tie at utility 0.6, so the frozen ranking has no regret.
  CHECK(c.l_regret == doctest::Approx(0.0).scale(1.0));
  // Single inverted-score pair: |u(1,1) - u(1,2)| = 0.3.
  CHECK(c.l_hinge == doctest::Approx(0.3));
  // The lone ordered pair's swap gain is exactly zero.
  CHECK(c.l_loss == doctest::Approx(0.0).scale(1.0));
  CHECK(c.c1 == doctest::Approx(14.427015905656397));
  CHECK(c.c2 == doctest::Approx(0.3 * 14.427015905656397));
  CHECK(c.slack_hinge == doctest::Approx(0.3));
  CHECK(c.slack_loss == doctest::Approx(4.028104771696919));
}

TEST_CASE("malformed snapshots are rejected, out-of-scope ones skipped") {
  BoundSnapshot snap = hand_snapshot();
  snap.positions = {1, 1};
  CHECK_THROWS_AS(verify_bound_snapshot(snap), std::invalid_argument);

  snap = hand_snapshot();
  snap.scores[0] = 6.0;
  CHECK_THROWS_AS(verify_bound_snapshot(snap), std::invalid_argument);

  // Positions that contradict the scores are a caller bug...
  snap = hand_snapshot();
  snap.positions = {2, 1};
  CHECK_THROWS_AS(verify_bound_snapshot(snap), std::invalid_argument);

  // ...but with tied scores any permutation is consistent: skip, don't throw.
  snap = hand_snapshot();
  snap.scores = {1.0, 1.0};
  snap.positions = {2, 1};
  const BoundCheck tied = verify_bound_snapshot(snap);
  CHECK(tied.score_ties);
  CHECK_FALSE(tied.checked);
  CHECK_FALSE(tied.violated);

  snap = hand_snapshot();
  snap.table.cell(1, 1) = 0.05;  // row now increases with depth
  const BoundCheck bumpy = verify_bound_snapshot(snap);
  CHECK_FALSE(bumpy.monotone);
  CHECK_FALSE(bumpy.checked);

  snap = hand_snapshot();
  snap.scores = {};
  snap.positions = {};
  snap.table = UtilityTable::zeros(1, 1);
  CHECK_THROWS_AS(verify_bound_snapshot(snap), std::invalid_argument);

  snap = hand_snapshot();
  snap.positions = {1, 2, 3};
  CHECK_THROWS_AS(verify_bound_snapshot(snap), std::invalid_argument);
}

TEST_CASE("report aggregation buckets checked, ties and non-monotone") {
  BoundSnapshot tied = hand_snapshot();
  tied.scores = {0.5, 0.5};
  BoundSnapshot bumpy = hand_snapshot();
  bumpy.table.cell(0, 2) = 0.9;

  const BoundReport report = verify_bounds({hand_snapshot(), tied, bumpy});
  CHECK(report.n_checked == 1);
  CHECK(report.n_skipped_ties == 1);
  CHECK(report.n_skipped_nonmonotone == 1);
  CHECK(report.n_violations == 0);
  CHECK(report.checks.size() == 3);
  CHECK(report.min_slack_hinge == doctest::Approx(0.3));

  // No checkable snapshot: slacks report as zero, not +inf.
  const BoundReport none = verify_bounds({tied});
  CHECK(none.n_checked == 0);
  CHECK(none.min_slack_hinge == 0.0);
  CHECK(none.min_slack_loss == 0.0);
}

TEST_CASE("random generator respects its own preconditions") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(8ull));
    const int k_max = 1 + static_cast<int>(rng.uniform_int(5ull));
    const BoundSnapshot snap = random_monotone_snapshot(n, k_max, 1.0, 5.0, rng);
    CHECK(snap.table.all_rows_monotone());
    REQUIRE(static_cast<int>(snap.scores.size()) == n);
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(snap.scores[i]) <= 5.0);
      for (int j = i + 1; j < n; ++j) CHECK(snap.scores[i] != snap.scores[j]);
    }
    CHECK_NOTHROW(check_permutation([&] {
      std::vector<int> zero_based(snap.positions.size());
      for (std::size_t i = 0; i < snap.positions.size(); ++i)
        zero_based[i] = snap.positions[i] - 1;
      return zero_based;
    }(), n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (snap.scores[i] > snap.scores[j]) CHECK(snap.positions[i] < snap.positions[j]);
  }
  CHECK_THROWS_AS(random_monotone_snapshot(0, 3, 1.0, 5.0, rng), std::invalid_argument);
}

TEST_CASE("chain holds on random in-scope instances") {
  Rng rng(123);
  BoundReport report;
  std::vector<BoundSnapshot> snaps;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(7ull));
    const int k_max = 1 + static_cast<int>(rng.uniform_int(6ull));
    const double sigma = rng.uniform(0.5, 2.0);
    snaps.push_back(random_monotone_snapshot(n, k_max, sigma, 5.0, rng));
  }
  report = verify_bounds(snaps);
  CHECK(report.n_checked == 200);
  CHECK(report.n_violations == 0);
  CHECK(report.min_slack_hinge >= -kBoundTolerance);
  CHECK(report.min_slack_loss >= -kBoundTolerance);
}

TEST_CASE("scalar lemmas hold on dense grids") {
  for (auto [sigma, c] : {std::pair{1.0, 5.0}, std::pair{2.0, 3.0}, std::pair{0.7, 1.0}}) {
    CHECK(lemma_indicator_slack(sigma, c, 10001) >= 0.0);
    CHECK(lemma_complement_slack(sigma, c, 10001) >= 0.0);
  }
  // At x = 0 the indicator costs 1 and log2(2) = 1: the slack touches zero.
  CHECK(lemma_indicator_slack(1.0, 5.0, 10001) == doctest::Approx(0.0).scale(1.0));
  CHECK_THROWS_AS(lemma_indicator_slack(1.0, 5.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(lemma_complement_slack(1.0, 5.0, 0), std::invalid_argument);
}

TEST_CASE("report files") {
  TempDir dir("bound_report");
  const BoundReport report = verify_bounds({hand_snapshot()});

  const auto json_path = dir.path() / "bounds.json";
  write_bound_report_json(report, json_path);
  std::ifstream in(json_path);
  nlohmann::json j;
  in >> j;
  CHECK(j.at("kind") == "bound_report");
  CHECK(j.at("n_checked") == 1);
  CHECK(j.at("checks").size() == 1);
  CHECK(j.at("checks")[0].at("q") == "hand");

  const auto csv_path = dir.path() / "bounds.csv";
  write_bound_report_csv(report, csv_path);
  std::ifstream csv(csv_path);
  std::string header;
  std::getline(csv, header);
  CHECK(header ==
        "query_id,epoch,l_regret,l_hinge,l_loss,c1,c2,slack_hinge,slack_loss,"
        "monotone,score_ties,checked,violated");
  std::string row;
  std::getline(csv, row);
  CHECK(row.substr(0, 7) == "hand,1,");
}

}  // TEST_SUITE
