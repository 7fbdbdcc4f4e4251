#pragma once

// Synthetic click logging. A hidden examination/relevance model
// generates position-biased clicks over rankings produced by a fixed
// logging policy; the resulting sessions are the only training signal
// the learners see.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "urank/click_model.hpp"
#include "urank/letor.hpp"
#include "urank/mlp.hpp"

namespace urank {

// Ground truth: click = examination * relevance, both observable here
// but hidden from the learners.
//
//   P(examine | position k, features x) = 1 / k^{max(w.x + 1, 0)}
//   P(relevant | grade y)               = eps + (1 - eps) * (2^y - 1) / (2^{y_max} - 1)
//
// The per-query feature vector steers how steep the position decay is;
// w has zero mean so the decay exponent is centred at 1.
class OracleClickModel final : public ClickModel {
 public:
  OracleClickModel() = default;
  OracleClickModel(std::vector<double> attention_weights, double eta, double epsilon,
                   int y_max, int k_max);

  // w ~ U[-eta, eta)^d, then mean-subtracted (so entries can reach 2*eta
  // in magnitude but always sum to zero).
  static OracleClickModel sample(int feature_dim, double eta, double epsilon, int y_max,
                                 int k_max, std::uint64_t seed);

  double attention_prob(std::span<const double> features, int position) const;
  double relevance_prob(int relevance) const;

  double click_prob(const Item& item, int position) const override;
  int max_position() const override { return k_max_; }

  int feature_dim() const { return static_cast<int>(w_.size()); }
  double epsilon() const { return epsilon_; }
  double eta() const { return eta_; }
  int y_max() const { return y_max_; }
  const std::vector<double>& attention_weights() const { return w_; }

  nlohmann::json to_json() const;
  static OracleClickModel from_json(const nlohmann::json& j);

 private:
  void validate() const;

  std::vector<double> w_;
  double eta_ = 1.0;
  double epsilon_ = 0.1;
  int y_max_ = 4;
  int k_max_ = 10;
};

void save_click_model(const OracleClickModel& model, const std::filesystem::path& path);
OracleClickModel load_click_model(const std::filesystem::path& path);

// How the logged rankings were produced.
enum class PolicyKind {
  random_shuffle,      // fresh uniform permutation per query
  relevance_sorted,    // grade desc, item_id asc — an "ideal" logger
  pretrained_pointwise // weak pointwise scorer fit on a sliver of labels
};

std::string to_string(PolicyKind kind);
PolicyKind parse_policy_kind(const std::string& name);

struct LoggingPolicy {
  PolicyKind kind = PolicyKind::random_shuffle;
  std::shared_ptr<const Mlp> scorer;  // only for pretrained_pointwise
};

// Fits the weak pointwise scorer: regression onto graded labels from a
// `label_fraction` subsample of documents (at least one per query).
LoggingPolicy make_pretrained_policy(const Dataset& data, double label_fraction,
                                     std::uint64_t seed);

// Permutation of item ids, best-first. Deterministic given the seed;
// the seed only matters for random_shuffle.
std::vector<int> rank_by_policy(const LoggingPolicy& policy, const QueryGroup& query,
                                std::uint64_t seed);

// One logged impression: the displayed prefix of a ranking plus its
// sampled click vector. Position of items[r] is r+1.
struct ClickSession {
  std::string query_id;
  std::vector<int> items;       // item ids, display order, size <= k_max
  std::vector<std::uint8_t> clicks;  // same length as items

  int position_of(int item_id) const;  // 1-based, 0 if not shown
};

// `sessions_per_query` logged impressions per query. The policy ranking
// is drawn once per query and reused across that query's sessions
// (a stable logger); clicks are i.i.d. across sessions.
std::vector<ClickSession> simulate_sessions(const Dataset& data, const ClickModel& model,
                                            const LoggingPolicy& policy,
                                            int sessions_per_query, std::uint64_t seed);

void write_sessions_jsonl(const std::vector<ClickSession>& sessions,
                          const std::filesystem::path& path);
std::vector<ClickSession> read_sessions_jsonl(const std::filesystem::path& path);

// sessions grouped by query id, preserving order. Each entry of the
// result indexes into `sessions`.
std::vector<std::vector<const ClickSession*>> group_sessions(
    const std::vector<ClickSession>& sessions, const Dataset& data);

}  // namespace urank
