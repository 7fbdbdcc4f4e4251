#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "urank/eval.hpp"

using namespace urank;
using urank::testing::FakeClickModel;
using urank::testing::make_item;
using urank::testing::make_query;

namespace {

// Two queries over the same scripted click table: q0 shows two items,
// q1 a single one (its item id 0 reads the table's first row).
Dataset two_query_data() {
  Dataset data;
  data.feature_dim = 1;
  data.y_max = 2;
  data.queries.push_back(
      make_query("q0", {make_item(0, {0.0}, 1, 2.0), make_item(1, {0.0}, 2, 1.0)}));
  data.queries.push_back(make_query("q1", {make_item(0, {0.0}, 1, 3.0)}));
  return data;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("oracle utility sums click probabilities over displayed positions") {
  const FakeClickModel model({{0.5, 0.25}, {0.4, 0.2}});
  const Dataset data = two_query_data();
  const Rankings rankings{{0, 1}, {0}};

  const UtilityBreakdown u = oracle_utility(model, data, rankings);
  // q0: 0.5 + 0.2 = 0.7 clicks; q1 shows one doc: 0.5.
  CHECK(u.clicks_per_query == doctest::Approx(0.6));
  // revenue: q0 = 0.5*2 + 0.2*1 = 1.2; q1 = 0.5*3 = 1.5.
  CHECK(u.revenue_per_query == doctest::Approx(1.35));
  CHECK(u.ctr_per_doc == doctest::Approx(1.2 / 3.0));

  const auto per_query = per_query_expected_clicks(model, data, rankings);
  CHECK(per_query[0] == doctest::Approx(0.7));
  CHECK(per_query[1] == doctest::Approx(0.5));

  // Reversing q0 swaps the table columns.
  const auto swapped = per_query_expected_clicks(model, data, {{1, 0}, {0}});
  CHECK(swapped[0] == doctest::Approx(0.65));

  // A one-position model truncates the display.
  const FakeClickModel shallow({{0.5}, {0.4}});
  const UtilityBreakdown t = oracle_utility(shallow, data, rankings);
  CHECK(t.clicks_per_query == doctest::Approx(0.5));
  CHECK(t.ctr_per_doc == doctest::Approx(0.5));

  CHECK_THROWS_AS(oracle_utility(model, Dataset{}, {}), std::invalid_argument);
  CHECK_THROWS_AS(oracle_utility(model, data, Rankings{{0, 0}, {0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(oracle_utility(model, data, Rankings{{0, 1}}), std::invalid_argument);
}

TEST_CASE("estimated utility reweights logged clicks by ctr ratios") {
  const FakeClickModel ctr({{0.5, 0.25}, {0.4, 0.2}});
  Dataset data;
  data.feature_dim = 1;
  data.y_max = 1;
  data.queries.push_back(
      make_query("q0", {make_item(0, {0.0}, 1, 2.0), make_item(1, {0.0}, 1, 1.0)}));

  std::vector<ClickSession> sessions{{"q0", {0, 1}, {1, 0}}};

  // Keeping the logged order makes every ratio exactly 1: value = bid.
  CHECK(estimated_utility(sessions, ctr, data, {{0, 1}}) == doctest::Approx(2.0));
  // Reversed, the clicked item drops to position 2: 0.25/0.5 * 2.
  CHECK(estimated_utility(sessions, ctr, data, {{1, 0}}) == doctest::Approx(1.0));

  // Session means, then query means.
  sessions.push_back({"q0", {0, 1}, {0, 1}});
  CHECK(estimated_utility(sessions, ctr, data, {{0, 1}}) == doctest::Approx(1.5));

  // New position beyond the model depth contributes nothing.
  const FakeClickModel shallow({{0.5}, {0.4}});
  const std::vector<ClickSession> one_click{{"q0", {0}, {1}}};
  CHECK(estimated_utility(one_click, shallow, data, {{1, 0}}) == 0.0);

  // Clamp-floor denominators are counted, not silently absorbed.
  const FakeClickModel floor({{1e-6, 0.25}, {0.4, 0.2}});
  int n_clamped = -1;
  estimated_utility(sessions, floor, data, {{0, 1}}, &n_clamped);
  CHECK(n_clamped == 1);

  CHECK_THROWS_AS(estimated_utility({}, ctr, data, {{0, 1}}), std::invalid_argument);
}

TEST_CASE("debiased at-k swaps only the examination factor") {
  const OracleClickModel oracle({0.5, -0.5}, 0.25, 0.1, 2, 2);
  Dataset data;
  data.feature_dim = 2;
  data.y_max = 2;
  // decay exponents: item 0 -> 1.5, item 1 -> 0.5.
  data.queries.push_back(
      make_query("q0", {make_item(0, {1.0, 0.0}, 2, 2.0), make_item(1, {0.0, 1.0}, 1, 1.0)}));
  const std::vector<ClickSession> sessions{{"q0", {0, 1}, {1, 1}}};
  const Rankings reversed{{1, 0}};

  const DebiasedAtK k1 = debiased_at_k(sessions, oracle, data, reversed, 1);
  // Only item 1 lands inside the cutoff; its examination rises 2^-0.5 -> 1.
  CHECK(k1.clicks == doctest::Approx(std::sqrt(2.0)));
  CHECK(k1.revenue == doctest::Approx(std::sqrt(2.0)));

  const DebiasedAtK k2 = debiased_at_k(sessions, oracle, data, reversed, 2);
  CHECK(k2.clicks == doctest::Approx(std::pow(2.0, -1.5) + std::sqrt(2.0)));
  CHECK(k2.revenue == doctest::Approx(2.0 * std::pow(2.0, -1.5) + std::sqrt(2.0)));

  // Beyond the display depth the cutoff saturates: same as k = 2.
  const DebiasedAtK k9 = debiased_at_k(sessions, oracle, data, reversed, 9);
  CHECK(k9.clicks == doctest::Approx(k2.clicks));

  // The logged ranking is its own fixed point.
  const DebiasedAtK same = debiased_at_k(sessions, oracle, data, {{0, 1}}, 2);
  CHECK(same.clicks == doctest::Approx(2.0));
  CHECK(same.revenue == doctest::Approx(3.0));

  CHECK_THROWS_AS(debiased_at_k(sessions, oracle, data, reversed, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(debiased_at_k({}, oracle, data, reversed, 1), std::invalid_argument);
}

TEST_CASE("mean average precision with skip accounting") {
  Dataset data;
  data.feature_dim = 1;
  data.y_max = 2;
  data.queries.push_back(make_query(
      "q0", {make_item(0, {0.0}, 1), make_item(1, {0.0}, 0), make_item(2, {0.0}, 2)}));
  Rankings rankings{{0, 1, 2}};
  int skipped = -1;
  // Hits at ranks 1 and 3: AP = (1/1 + 2/3) / 2.
  CHECK(mean_average_precision(data, rankings, &skipped) == doctest::Approx(5.0 / 6.0));
  CHECK(skipped == 0);

  data.queries.push_back(make_query("q1", {make_item(0, {0.0}, 0)}));
  rankings.push_back({0});
  CHECK(mean_average_precision(data, rankings, &skipped) == doctest::Approx(5.0 / 6.0));
  CHECK(skipped == 1);

  Dataset hopeless;
  hopeless.feature_dim = 1;
  hopeless.y_max = 2;
  hopeless.queries.push_back(make_query("q0", {make_item(0, {0.0}, 0)}));
  CHECK_THROWS_AS(mean_average_precision(hopeless, {{0}}, nullptr), std::invalid_argument);
}

TEST_CASE("ndcg at k against hand-computed discounts") {
  Dataset data;
  data.feature_dim = 1;
  data.y_max = 3;
  data.queries.push_back(make_query("q0", {make_item(0, {0.0}, 3), make_item(1, {0.0}, 1)}));

  const double d2 = 1.0 / std::log2(3.0);
  CHECK(mean_ndcg_at_k(data, {{0, 1}}, 2, nullptr) == doctest::Approx(1.0));
  CHECK(mean_ndcg_at_k(data, {{1, 0}}, 2, nullptr) ==
        doctest::Approx((1.0 + 7.0 * d2) / (7.0 + d2)));
  CHECK(mean_ndcg_at_k(data, {{1, 0}}, 1, nullptr) == doctest::Approx(1.0 / 7.0));

  int skipped = -1;
  data.queries.push_back(make_query("q1", {make_item(0, {0.0}, 0)}));
  CHECK(mean_ndcg_at_k(data, {{0, 1}, {0}}, 2, &skipped) == doctest::Approx(1.0));
  CHECK(skipped == 1);

  Dataset flat;
  flat.feature_dim = 1;
  flat.y_max = 1;
  flat.queries.push_back(make_query("q0", {make_item(0, {0.0}, 0)}));
  CHECK_THROWS_AS(mean_ndcg_at_k(flat, {{0}}, 2, nullptr), std::invalid_argument);
  CHECK_THROWS_AS(mean_ndcg_at_k(data, {{0, 1}, {0}}, 0, nullptr), std::invalid_argument);
}

TEST_CASE("position click distribution averages only filled slots") {
  const FakeClickModel model({{0.5, 0.25}, {0.4, 0.2}});
  const Dataset data = two_query_data();
  const auto dist = position_click_distribution(model, data, {{0, 1}, {0}}, 2);
  REQUIRE(dist.size() == 2);
  CHECK(dist[0] == doctest::Approx(0.5));  // both queries fill slot 1 with row-0 items
  CHECK(dist[1] == doctest::Approx(0.2));  // only q0 reaches slot 2

  // Depth saturates at the model's max position.
  CHECK(position_click_distribution(model, data, {{0, 1}, {0}}, 9) == dist);
  CHECK_THROWS_AS(position_click_distribution(model, data, {{0, 1}, {0}}, 0),
                  std::invalid_argument);
}

TEST_CASE("paired t-test frozen against an independent computation") {
  const PairedTTest r = paired_ttest({1.0, 2.0, 3.0, 4.0}, {0.0, 0.0, 0.0, 0.0});
  CHECK(r.t == doctest::Approx(std::sqrt(15.0)));
  CHECK(r.dof == 3);
  CHECK(r.mean_diff == doctest::Approx(2.5));
  CHECK(r.p == doctest::Approx(0.030466291662170977).epsilon(1e-9));

  const PairedTTest same = paired_ttest({0.3, 0.7}, {0.3, 0.7});
  CHECK(same.t == 0.0);
  CHECK(same.p == 1.0);

  const PairedTTest shifted = paired_ttest({1.5, 2.5}, {1.0, 2.0});
  CHECK(std::isinf(shifted.t));
  CHECK(shifted.t > 0.0);
  CHECK(shifted.p == 0.0);

  CHECK_THROWS_AS(paired_ttest({1.0}, {0.0}), std::invalid_argument);
  CHECK_THROWS_AS(paired_ttest({1.0, 2.0}, {0.0}), std::invalid_argument);
}

}  // TEST_SUITE
