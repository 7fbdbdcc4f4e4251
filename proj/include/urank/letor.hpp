#pragma once

// In-memory dataset model plus LETOR (SVMLight-with-qid) reading/writing and
// a synthetic dataset generator for desk-scale runs.

#include <cstdint>
#include <string>
#include <vector>

namespace urank {

struct Item {
  int item_id = 0;                 // index within its query, 0..n-1
  std::vector<double> features;    // length == Dataset::feature_dim
  int relevance = 0;               // grade in 0..y_max
  double utility_value = 1.0;      // per-item value (bid, watch time, ...)
};

struct QueryGroup {
  std::string query_id;
  std::vector<Item> items;

  int size() const { return static_cast<int>(items.size()); }
};

struct Dataset {
  std::vector<QueryGroup> queries;
  int feature_dim = 0;
  int y_max = 0;

  int total_items() const;
  // Index of a query by id; throws if absent.
  const QueryGroup& query(const std::string& id) const;
};

// Throws std::runtime_error with "<path>:<line>: ..." on malformed input,
// out-of-range feature ids, or labels above y_max. Feature ids not present
// on a line are zero-filled. Lines with the same qid are merged into one
// QueryGroup even when non-contiguous. An optional "# b=<value>" comment
// carries the item's utility value.
Dataset parse_letor(const std::string& path, int feature_dim, int y_max = 4);

// Inverse of parse_letor: full-precision feature values and a "# b=" comment
// per line, so that parse(write(d)) == d.
void write_letor(const Dataset& dataset, const std::string& path);

enum class BidKind { constant, uniform };

struct BidSpec {
  BidKind kind = BidKind::constant;
  double value = 1.0;  // constant
  double low = 0.5;    // uniform bounds
  double high = 2.0;
};

// Deterministic synthetic dataset. Features are uniform in [0,1]^dim.
// Relevance follows a hidden linear scorer over the features with a 10%
// uniform-grade noise floor, so grades are learnable from features while
// every grade keeps nonzero probability everywhere.
Dataset generate_synthetic(int n_queries, int n_docs, int feature_dim, int y_max,
                           std::uint64_t seed, const BidSpec& bids = {});

// First min(n, k_max) items of `query` under `order`; `order` must be a
// permutation of 0..n-1. Item ids are renumbered 0..m-1.
QueryGroup truncate_to_top_k(const QueryGroup& query, int k_max,
                             const std::vector<int>& order);

// Validates that `order` is a permutation of 0..n-1; throws otherwise.
void check_permutation(const std::vector<int>& order, int n);

}  // namespace urank
