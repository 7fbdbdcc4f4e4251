#pragma once

// Numerical audit of the chain that justifies the pairwise surrogate:
// with clipped scores s, the ranking k they induce, and a utility table
// whose rows never increase with depth,
//
//   regret  L_r  = (best matching utility) - (utility of k)
//   hinge   L''  = sum_i sum_{j: s_i < s_j} |u(i, k_j) - u(i, k_i)|
//   loss    L'   = the trained pairwise objective
//   C1 = max(log2(1 + e^{2 sigma C}), 2)
//   C2 = C1 * sum_j sum_{i: k_i > k_j} (u(j, k_j) - u(j, k_i))
//
// must satisfy L_r <= L'' <= L' + C2. Both inequalities are checked per
// snapshot; non-monotone tables (possible with a learned CTR) and exact
// score ties are outside the chain's preconditions and are skipped with
// a count rather than reported as violations.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "urank/ranker.hpp"
#include "urank/rng.hpp"

namespace urank {

struct BoundCheck {
  std::string query_id;
  int epoch = 0;
  double l_regret = 0.0;
  double l_hinge = 0.0;
  double l_loss = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double slack_hinge = 0.0;  // l_hinge - l_regret
  double slack_loss = 0.0;   // l_loss + c2 - l_hinge
  bool monotone = true;
  bool score_ties = false;
  bool checked = false;   // monotone && !score_ties
  bool violated = false;  // checked && a slack below -tolerance
};

struct BoundReport {
  std::vector<BoundCheck> checks;
  int n_checked = 0;
  int n_skipped_nonmonotone = 0;
  int n_skipped_ties = 0;
  int n_violations = 0;
  double min_slack_hinge = 0.0;
  double min_slack_loss = 0.0;

  nlohmann::json to_json() const;
};

inline constexpr double kBoundTolerance = 1e-9;

// C1 for given sigma and score bound, computed overflow-free.
double bound_c1(double sigma, double score_bound);

BoundCheck verify_bound_snapshot(const BoundSnapshot& snap);
BoundReport verify_bounds(const std::vector<BoundSnapshot>& snaps);

void write_bound_report_json(const BoundReport& report, const std::filesystem::path& path);
void write_bound_report_csv(const BoundReport& report, const std::filesystem::path& path);

// Random instance inside the chain's preconditions: non-negative
// non-increasing utility rows (a share of them all-zero, mirroring
// never-clicked items), distinct scores in [-C, C], and k = the ranking
// those scores induce.
BoundSnapshot random_monotone_snapshot(int n_items, int k_max, double sigma,
                                       double score_bound, Rng& rng);

// Dense grid checks of the two scalar inequalities behind the chain,
// on x in [-C, C]:
//   indicator(x <= 0)  <=  log2(1 + e^{-sigma x})
//   indicator(x >= 0)  <=  max(log2(1 + e^{sigma C}), 2) - log2(1 + e^{-sigma x})
// Returns the minimum slack observed; non-negative means the
// inequality held everywhere on the grid.
double lemma_indicator_slack(double sigma, double score_bound, int grid_points);
double lemma_complement_slack(double sigma, double score_bound, int grid_points);

}  // namespace urank
