#pragma once

// Maximum-weight assignment of items to ranked positions. Used for the
// utility-optimal oracle ranking and as the target of the bound chain.

#include <filesystem>
#include <vector>

#include "urank/click_model.hpp"
#include "urank/letor.hpp"

namespace urank {

// Dense n_items x n_positions weight table, row-major. Column j holds
// the payoff of showing the item at position j+1.
struct WeightMatrix {
  int n_items = 0;
  int n_positions = 0;
  std::vector<double> w;

  double at(int item, int col) const { return w[static_cast<std::size_t>(item) * n_positions + col]; }
  double& at(int item, int col) { return w[static_cast<std::size_t>(item) * n_positions + col]; }

  static WeightMatrix zeros(int n_items, int n_positions);

  // Expected utility per slot: click_prob(item, k) * bid. Positions run
  // 1..min(n_items, k_max).
  static WeightMatrix from_click_model(const ClickModel& model, const QueryGroup& query,
                                       int k_max);
};

WeightMatrix read_weight_csv(const std::filesystem::path& path);
void write_weight_csv(const WeightMatrix& m, const std::filesystem::path& path);

struct MatchingResult {
  // 1-based position per item; 0 when the item is left out (more items
  // than positions).
  std::vector<int> position_of_item;
  double total_weight = 0.0;

  // Item ids in display order. When some items are unplaced, they are
  // appended after the placed ones in id order, so the result is always
  // a full permutation usable as a ranking.
  std::vector<int> as_ranking() const;
};

// Hungarian algorithm with potentials, O(n^3). Requires
// n_positions <= n_items; every position receives exactly one item.
// Ties between equally good assignments resolve deterministically
// (fixed scan order), independent of the weight scale.
MatchingResult km_match(const WeightMatrix& m);

// Exhaustive search over injective position->item maps. n_items <= 10.
MatchingResult brute_force_match(const WeightMatrix& m);

// Sum of w[order[r], r] over the matrix's positions; `order` must be a
// permutation of 0..n_items-1 (leading entries are the displayed ones).
double utility_of_ranking(const WeightMatrix& m, const std::vector<int>& order);

}  // namespace urank
