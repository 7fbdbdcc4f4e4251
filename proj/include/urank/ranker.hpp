#pragma once

// The utility-oriented ranker. Debiased per-(item, position) utility
// tables are estimated from logged clicks plus a position-aware CTR
// model; a scoring net is then trained with a pairwise loss whose pair
// weights are the utility swap gains, alternating between re-ranking
// (freezing positions) and gradient steps on the scores.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "urank/click_model.hpp"
#include "urank/click_sim.hpp"
#include "urank/mlp.hpp"

namespace urank {

// Estimated expected utility of showing each item at positions
// 1..k_max. Positions beyond k_max earn zero (the list is truncated).
struct UtilityTable {
  int n_items = 0;
  int k_max = 0;
  std::vector<double> u;  // row-major, n_items x k_max

  double& cell(int item, int position) {  // position is 1-based
    return u[static_cast<std::size_t>(item) * k_max + (position - 1)];
  }
  // 1-based position; any position > k_max yields 0.
  double at(int item, int position) const {
    if (position > k_max) return 0.0;
    return u[static_cast<std::size_t>(item) * k_max + (position - 1)];
  }

  static UtilityTable zeros(int n_items, int k_max);

  // True when the row never increases with position depth. Holds by
  // construction for examination-style click models; a learned CTR net
  // may violate it, and the bound verifier skips such rows' queries.
  bool row_monotone(int item, double tol = 1e-12) const;
  bool all_rows_monotone(double tol = 1e-12) const;

  nlohmann::json to_json() const;
  static UtilityTable from_json(const nlohmann::json& j);
};

// Inverse-propensity estimate from this query's sessions:
//   u(i, k) = bid_i * ctr(f_i, k) * mean_s[ click_s(i) / ctr(f_i, logged pos) ]
// Items a session did not show contribute zero to the mean for that
// session. Never-clicked items get all-zero rows.
UtilityTable build_utility_table(const std::vector<const ClickSession*>& sessions,
                                 const ClickModel& ctr, const QueryGroup& query);

// Tables for every query of `data`, aligned with data.queries.
std::vector<UtilityTable> build_utility_tables(const std::vector<ClickSession>& sessions,
                                               const ClickModel& ctr, const Dataset& data);

// Utility gained by swapping the positions of items i and j:
//   u(i, k_j) + u(j, k_i) - u(i, k_i) - u(j, k_j).
// Positive when the swap helps; the sign is kept, not folded away.
double delta_util(const UtilityTable& t, int i, int j, int k_i, int k_j);

// Scoring net over [features ++ bid]; scores are hard-clipped to
// [-score_bound, score_bound], which the loss bounds rely on.
struct ScoringModel {
  Mlp net;
  double sigma = 1.0;
  double score_bound = 5.0;

  double raw_score(const Item& item) const;
  double score(const Item& item) const;  // clipped

  // Item ids by decreasing clipped score, ties by item id.
  std::vector<int> rank(const QueryGroup& query) const;

  nlohmann::json to_json() const;
  static ScoringModel from_json(const nlohmann::json& j);
};

void save_scoring_model(const ScoringModel& m, const std::filesystem::path& path);
ScoringModel load_scoring_model(const std::filesystem::path& path);

// Pairwise loss over one query given clipped scores `s` and frozen
// 1-based positions `k` (k[i] is item i's position in the frozen
// ranking, possibly > k_max):
//   sum over ordered pairs with k[j] < k[i] of
//     delta_util(i, j) * log2(1 + e^{-sigma (s_i - s_j)})
// When `grad_s` is non-null it receives dloss/ds per item.
double urank_pair_loss(std::span<const double> s, std::span<const int> k,
                       const UtilityTable& t, double sigma,
                       std::vector<double>* grad_s = nullptr);

// Everything needed to audit one E-step state offline: clipped scores,
// the ranking they induce, and the utility table in force.
struct BoundSnapshot {
  std::string query_id;
  int epoch = 0;
  double sigma = 1.0;
  double score_bound = 5.0;
  std::vector<double> scores;  // clipped, indexed by item id
  std::vector<int> positions;  // 1-based, induced by `scores`
  UtilityTable table;

  nlohmann::json to_json() const;
  static BoundSnapshot from_json(const nlohmann::json& j);
};

void write_snapshots_jsonl(const std::vector<BoundSnapshot>& snaps,
                           const std::filesystem::path& path);
std::vector<BoundSnapshot> read_snapshots_jsonl(const std::filesystem::path& path);

struct UrankTrainConfig {
  std::vector<int> hidden_sizes{32, 16};
  double learning_rate = 0.02;
  int epochs = 60;
  int rerank_every = 1;  // E-step cadence, in epochs
  double sigma = 1.0;
  double score_bound = 5.0;
  std::uint64_t seed = 3;
  // Snapshot the first `snapshot_queries` queries at every E-step when
  // positive; 0 disables snapshotting.
  int snapshot_queries = 0;
};

struct UrankEpochStats {
  int epoch = 0;
  double loss = 0.0;
  double estimated_utility = 0.0;  // sum over queries of u(i, k_i) at epoch end
};

struct UrankTrainReport {
  std::vector<UrankEpochStats> epochs;
  std::vector<BoundSnapshot> snapshots;
  nlohmann::json to_json() const;
};

ScoringModel train_urank(const Dataset& data, const std::vector<ClickSession>& sessions,
                         const ClickModel& ctr, const UrankTrainConfig& cfg,
                         UrankTrainReport* report = nullptr);

}  // namespace urank
