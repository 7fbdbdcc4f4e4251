#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "urank/letor.hpp"

using namespace urank;
using urank::testing::TempDir;

namespace {

std::string write_file(const TempDir& dir, const std::string& name,
                       const std::string& content) {
  const auto path = dir.path() / name;
  std::ofstream out(path);
  out << content;
  return path.string();
}

// Asserts `fn` throws a runtime_error whose message mentions `needle`.
template <typename Fn>
void expect_parse_error(Fn&& fn, const std::string& needle) {
  try {
    fn();
    FAIL("expected a parse error mentioning '" << needle << "'");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CAPTURE(msg);
    CHECK(msg.find(needle) != std::string::npos);
  }
}

}  // namespace

TEST_SUITE("letor") {

TEST_CASE("parses labels, qids, sparse features and bid comments") {
  TempDir dir("letor_parse");
  const auto path = write_file(dir, "in.letor",
                               "2 qid:q1 1:0.5 3:-1.25 # b=2.0\n"
                               "0 qid:q1 2:1.0\n"
                               "\n"
                               "1 qid:q2 1:0.1 2:0.2 3:0.3\n"
                               "3 qid:q1 3:9.0\n");
  const Dataset ds = parse_letor(path, 3);

  REQUIRE(ds.queries.size() == 2);
  const QueryGroup& q1 = ds.query("q1");
  REQUIRE(q1.size() == 3);  // non-contiguous q1 lines merge
  CHECK(q1.items[0].relevance == 2);
  CHECK(q1.items[0].features == std::vector<double>{0.5, 0.0, -1.25});
  CHECK(q1.items[0].utility_value == 2.0);
  CHECK(q1.items[1].features == std::vector<double>{0.0, 1.0, 0.0});
  CHECK(q1.items[1].utility_value == 1.0);  // default bid
  CHECK(q1.items[2].relevance == 3);
  CHECK(q1.items[2].item_id == 2);

  const QueryGroup& q2 = ds.query("q2");
  REQUIRE(q2.size() == 1);
  CHECK(q2.items[0].features == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(ds.total_items() == 4);
  CHECK_THROWS_AS(ds.query("nope"), std::runtime_error);
}

TEST_CASE("parse errors carry path and line number") {
  TempDir dir("letor_err");

  const auto bad_label = write_file(dir, "a.letor", "1 qid:q1 1:0.5\nx qid:q1 1:0.5\n");
  expect_parse_error([&] { parse_letor(bad_label, 3); }, ":2: bad relevance label");

  const auto above_ymax = write_file(dir, "b.letor", "9 qid:q1 1:0.5\n");
  expect_parse_error([&] { parse_letor(above_ymax, 3); }, "exceeds y_max");

  const auto bad_fid = write_file(dir, "c.letor", "1 qid:q1 7:0.5\n");
  expect_parse_error([&] { parse_letor(bad_fid, 3); }, "feature id 7 outside 1..3");

  const auto no_qid = write_file(dir, "d.letor", "1 1:0.5\n");
  expect_parse_error([&] { parse_letor(no_qid, 3); }, "expected qid:");

  const auto bad_tok = write_file(dir, "e.letor", "1 qid:q1 1:\n");
  expect_parse_error([&] { parse_letor(bad_tok, 3); }, ":1: bad feature token");

  const auto bad_bid = write_file(dir, "f.letor", "1 qid:q1 1:0.5 # b=zz\n");
  expect_parse_error([&] { parse_letor(bad_bid, 3); }, "bad utility value");

  CHECK_THROWS_AS(parse_letor((dir.path() / "missing.letor").string(), 3),
                  std::runtime_error);
}

TEST_CASE("write/parse round trip is exact") {
  TempDir dir("letor_rt");
  BidSpec bids;
  bids.kind = BidKind::uniform;
  const Dataset ds = generate_synthetic(6, 7, 5, 4, 42, bids);

  const auto path = (dir.path() / "rt.letor").string();
  write_letor(ds, path);
  const Dataset back = parse_letor(path, ds.feature_dim, ds.y_max);

  REQUIRE(back.queries.size() == ds.queries.size());
  for (std::size_t qi = 0; qi < ds.queries.size(); ++qi) {
    const auto& a = ds.queries[qi];
    const auto& b = back.queries[qi];
    CHECK(a.query_id == b.query_id);
    REQUIRE(a.items.size() == b.items.size());
    for (std::size_t i = 0; i < a.items.size(); ++i) {
      CHECK(a.items[i].item_id == b.items[i].item_id);
      CHECK(a.items[i].relevance == b.items[i].relevance);
      CHECK(a.items[i].features == b.items[i].features);     // %.17g is lossless
      CHECK(a.items[i].utility_value == b.items[i].utility_value);
    }
  }
}

TEST_CASE("synthetic generation is deterministic and well-formed") {
  const Dataset a = generate_synthetic(10, 5, 4, 4, 7);
  const Dataset b = generate_synthetic(10, 5, 4, 4, 7);
  const Dataset c = generate_synthetic(10, 5, 4, 4, 8);

  REQUIRE(a.queries.size() == 10);
  CHECK(a.feature_dim == 4);
  bool any_differs = false;
  for (std::size_t qi = 0; qi < a.queries.size(); ++qi) {
    for (std::size_t i = 0; i < a.queries[qi].items.size(); ++i) {
      const Item& x = a.queries[qi].items[i];
      CHECK(x.relevance >= 0);
      CHECK(x.relevance <= 4);
      CHECK(x.utility_value == 1.0);
      for (double f : x.features) {
        CHECK(f >= 0.0);
        CHECK(f < 1.0);
      }
      CHECK(x.features == b.queries[qi].items[i].features);
      if (x.features != c.queries[qi].items[i].features) any_differs = true;
    }
  }
  CHECK(any_differs);

  BidSpec bids;
  bids.kind = BidKind::uniform;
  bids.low = 0.5;
  bids.high = 2.0;
  const Dataset d = generate_synthetic(4, 6, 3, 4, 7, bids);
  for (const auto& q : d.queries)
    for (const auto& it : q.items) {
      CHECK(it.utility_value >= 0.5);
      CHECK(it.utility_value < 2.0);
    }

  CHECK_THROWS_AS(generate_synthetic(0, 5, 4, 4, 7), std::invalid_argument);
}

TEST_CASE("truncate_to_top_k renumbers the kept prefix") {
  QueryGroup q = urank::testing::make_query(
      "q", {urank::testing::make_item(0, {0.0}, 1, 1.5),
            urank::testing::make_item(1, {1.0}, 2, 2.5),
            urank::testing::make_item(2, {2.0}, 3, 3.5)});
  const QueryGroup top = truncate_to_top_k(q, 2, {2, 0, 1});
  REQUIRE(top.size() == 2);
  CHECK(top.items[0].item_id == 0);
  CHECK(top.items[0].features == std::vector<double>{2.0});  // was item 2
  CHECK(top.items[0].utility_value == 3.5);
  CHECK(top.items[1].item_id == 1);
  CHECK(top.items[1].features == std::vector<double>{0.0});  // was item 0

  CHECK(truncate_to_top_k(q, 10, {2, 0, 1}).size() == 3);
  CHECK_THROWS_AS(truncate_to_top_k(q, 2, {0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(truncate_to_top_k(q, 0, {2, 0, 1}), std::invalid_argument);
}

TEST_CASE("check_permutation rejects malformed orders") {
  CHECK_NOTHROW(check_permutation({2, 0, 1}, 3));
  CHECK_THROWS_AS(check_permutation({0, 1}, 3), std::invalid_argument);
  CHECK_THROWS_AS(check_permutation({0, 0, 1}, 3), std::invalid_argument);
  CHECK_THROWS_AS(check_permutation({0, 1, 3}, 3), std::invalid_argument);
  CHECK_THROWS_AS(check_permutation({-1, 1, 0}, 3), std::invalid_argument);
}

}  // TEST_SUITE
