#pragma once

// Evaluation of rankings: expected-click / revenue totals under the
// ground-truth click model, debiased estimates from logged sessions,
// classic relevance metrics, and a paired significance test.

#include <string>
#include <vector>

#include "urank/click_model.hpp"
#include "urank/click_sim.hpp"
#include "urank/letor.hpp"

namespace urank {

// One ranking per query, aligned with data.queries; each entry is a
// permutation of that query's item ids (best first).
using Rankings = std::vector<std::vector<int>>;

// Expected clicks (and bid-weighted revenue) per query under `model`,
// counting only displayed positions 1..min(n, k_max).
struct UtilityBreakdown {
  double clicks_per_query = 0.0;   // mean over queries of expected clicks
  double revenue_per_query = 0.0;  // same, weighted by bids
  double ctr_per_doc = 0.0;        // expected clicks / displayed documents
};

UtilityBreakdown oracle_utility(const ClickModel& model, const Dataset& data,
                                const Rankings& rankings);

// Per-query expected clicks, for paired tests across methods.
std::vector<double> per_query_expected_clicks(const ClickModel& model, const Dataset& data,
                                              const Rankings& rankings);

// Inverse-propensity estimate of utility per query had `rankings` been
// shown, computed purely from the logged sessions and a click model:
// each logged click is reweighted by ctr(new position) / ctr(logged
// position) times the bid. Averaged over each query's sessions, then
// over queries that have sessions. `n_clamped`, when given, counts
// denominators sitting at the CTR model's clamp floor.
double estimated_utility(const std::vector<ClickSession>& sessions, const ClickModel& ctr,
                         const Dataset& data, const Rankings& rankings,
                         int* n_clamped = nullptr);

// Debiased #clicks@K and revenue@K from sessions under the *true*
// examination model: clicks keep their relevance outcome and swap the
// examination factor to the new position. K >= the display depth gives
// the untruncated variant; K < 1 is an error.
struct DebiasedAtK {
  double clicks = 0.0;
  double revenue = 0.0;
};

DebiasedAtK debiased_at_k(const std::vector<ClickSession>& sessions,
                          const OracleClickModel& oracle, const Dataset& data,
                          const Rankings& rankings, int top_k);

// Mean average precision; relevant = grade >= 1. Queries with no
// relevant documents are skipped (count reported via n_skipped).
double mean_average_precision(const Dataset& data, const Rankings& rankings,
                              int* n_skipped = nullptr);

// NDCG@k with gains 2^grade - 1 and log2 discounts. Queries whose ideal
// DCG is zero are skipped.
double mean_ndcg_at_k(const Dataset& data, const Rankings& rankings, int k,
                      int* n_skipped = nullptr);

// Mean true click probability of the document shown at each position
// 1..k_max, averaged over the queries that fill that position.
std::vector<double> position_click_distribution(const ClickModel& model,
                                                const Dataset& data,
                                                const Rankings& rankings, int k_max);

// Two-sided paired t-test over per-query differences a[i] - b[i].
struct PairedTTest {
  double t = 0.0;
  double p = 1.0;
  int dof = 0;
  double mean_diff = 0.0;
};

PairedTTest paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace urank
