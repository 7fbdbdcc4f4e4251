#pragma once

// Reference rankers the main method is compared against:
//  - naive_lambdarank:      pairwise NDCG-weighted loss on raw clicks
//  - ips_lambdarank:        same, clicks reweighted by true examination
//                           propensities (needs the simulator's oracle)
//  - ctr_at_1:              sort by predicted CTR at position 1, times bid
//  - km_oracle/km_estimated: assignment-optimal ranking under the true
//                           or the learned click model

#include <cstdint>
#include <string>
#include <vector>

#include "urank/click_sim.hpp"
#include "urank/ranker.hpp"

namespace urank {

enum class BaselineKind {
  naive_lambdarank,
  ips_lambdarank,
  ctr_at_1,
  km_oracle,
  km_estimated,
};

std::string to_string(BaselineKind kind);
BaselineKind parse_baseline_kind(const std::string& name);

struct LambdaRankConfig {
  std::vector<int> hidden_sizes{32, 16};
  double learning_rate = 0.02;
  int epochs = 60;
  double sigma = 1.0;
  double score_bound = 5.0;
  std::uint64_t seed = 4;
};

// Per-query relevance labels distilled from the click log; the two
// lambdarank flavours differ only in how a click is weighted.
struct LabelledQuery {
  std::vector<double> labels;  // indexed by item id, >= 0
};

// label_i = mean over sessions of click_i (unshown items count as 0).
std::vector<LabelledQuery> click_labels(const std::vector<ClickSession>& sessions,
                                        const Dataset& data);

// label_i = mean over sessions of click_i / P(examine at logged
// position), using the simulator's true propensities.
std::vector<LabelledQuery> ips_click_labels(const std::vector<ClickSession>& sessions,
                                            const Dataset& data,
                                            const OracleClickModel& oracle);

// NDCG-swap-weighted pairwise loss over one query (gains are the labels
// themselves, discount 1/log2(1+rank), ideal order by label desc then
// item id). Zero when all labels are equal. `grad_s` as in the ranker.
double lambdarank_loss(std::span<const double> s, const LabelledQuery& lq, double sigma,
                       std::vector<double>* grad_s = nullptr);

// Shared SGD driver for both flavours; exposed for tests that check the
// two coincide under uniform propensities.
ScoringModel train_pairwise_scorer(const Dataset& data,
                                   const std::vector<LabelledQuery>& labels,
                                   const LambdaRankConfig& cfg);

ScoringModel train_naive_lambdarank(const std::vector<ClickSession>& sessions,
                                    const Dataset& data, const LambdaRankConfig& cfg);

ScoringModel train_ips_lambdarank(const std::vector<ClickSession>& sessions,
                                  const Dataset& data, const OracleClickModel& oracle,
                                  const LambdaRankConfig& cfg);

// Greedy: sort by click_prob(item, 1) * bid, ties by item id.
std::vector<int> rank_ctr_at_1(const ClickModel& model, const QueryGroup& query);

// Assignment-optimal under `model` (oracle or learned): maximise the
// summed position-weighted utility via the matching solver.
std::vector<int> rank_km(const ClickModel& model, const QueryGroup& query, int k_max);

}  // namespace urank
