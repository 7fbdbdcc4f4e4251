#include "urank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace urank {

namespace {

void check_rankings(const Dataset& data, const Rankings& rankings) {
  if (rankings.size() != data.queries.size())
    throw std::invalid_argument("rankings/query count mismatch");
  for (std::size_t qi = 0; qi < rankings.size(); ++qi)
    check_permutation(rankings[qi], static_cast<int>(data.queries[qi].items.size()));
}

// 1-based position of every item under the given ranking.
std::vector<int> invert_ranking(const std::vector<int>& ranking) {
  std::vector<int> pos(ranking.size());
  for (std::size_t r = 0; r < ranking.size(); ++r) pos[ranking[r]] = static_cast<int>(r) + 1;
  return pos;
}

}  // namespace

UtilityBreakdown oracle_utility(const ClickModel& model, const Dataset& data,
                                const Rankings& rankings) {
  check_rankings(data, rankings);
  if (data.queries.empty()) throw std::invalid_argument("oracle_utility: empty dataset");
  double clicks = 0.0, revenue = 0.0;
  std::size_t docs = 0;
  for (std::size_t qi = 0; qi < data.queries.size(); ++qi) {
    const QueryGroup& q = data.queries[qi];
    const int shown =
        std::min<int>(static_cast<int>(q.items.size()), model.max_position());
    for (int r = 0; r < shown; ++r) {
      const Item& item = q.items[rankings[qi][r]];
      const double p = model.click_prob(item, r + 1);
      clicks += p;
      revenue += p * item.utility_value;
    }
    docs += static_cast<std::size_t>(shown);
  }
  UtilityBreakdown out;
  const double nq = static_cast<double>(data.queries.size());
  out.clicks_per_query = clicks / nq;
  out.revenue_per_query = revenue / nq;
  out.ctr_per_doc = docs ? clicks / static_cast<double>(docs) : 0.0;
  return out;
}

std::vector<double> per_query_expected_clicks(const ClickModel& model, const Dataset& data,
                                              const Rankings& rankings) {
  check_rankings(data, rankings);
  std::vector<double> out(data.queries.size(), 0.0);
  for (std::size_t qi = 0; qi < data.queries.size(); ++qi) {
    const QueryGroup& q = data.queries[qi];
    const int shown =
        std::min<int>(static_cast<int>(q.items.size()), model.max_position());
    for (int r = 0; r < shown; ++r)
      out[qi] += model.click_prob(q.items[rankings[qi][r]], r + 1);
  }
  return out;
}

double estimated_utility(const std::vector<ClickSession>& sessions, const ClickModel& ctr,
                         const Dataset& data, const Rankings& rankings, int* n_clamped) {
  check_rankings(data, rankings);
  const auto grouped = group_sessions(sessions, data);
  if (n_clamped) *n_clamped = 0;
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t qi = 0; qi < data.queries.size(); ++qi) {
    if (grouped[qi].empty()) continue;
    const QueryGroup& q = data.queries[qi];
    const auto new_pos = invert_ranking(rankings[qi]);
    double q_total = 0.0;
    for (const ClickSession* s : grouped[qi]) {
      for (std::size_t r = 0; r < s->items.size(); ++r) {
        if (!s->clicks[r]) continue;
        const int item = s->items[r];
        if (new_pos[item] > ctr.max_position()) continue;  // truncated away
        const Item& it = q.items[item];
        const double denom = ctr.click_prob(it, static_cast<int>(r) + 1);
        if (n_clamped && denom <= 1e-6) ++*n_clamped;
        const double ratio = ctr.click_prob(it, new_pos[item]) / denom;
        q_total += ratio * it.utility_value;
      }
    }
    total += q_total / static_cast<double>(grouped[qi].size());
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("estimated_utility: no sessions");
  return total / static_cast<double>(counted);
}

DebiasedAtK debiased_at_k(const std::vector<ClickSession>& sessions,
                          const OracleClickModel& oracle, const Dataset& data,
                          const Rankings& rankings, int top_k) {
  check_rankings(data, rankings);
  if (top_k < 1) throw std::invalid_argument("debiased_at_k: cutoff must be >= 1");
  const auto grouped = group_sessions(sessions, data);
  const int cutoff = std::min(top_k, oracle.max_position());
  DebiasedAtK out;
  std::size_t counted = 0;
  for (std::size_t qi = 0; qi < data.queries.size(); ++qi) {
    if (grouped[qi].empty()) continue;
    const QueryGroup& q = data.queries[qi];
    const auto new_pos = invert_ranking(rankings[qi]);
    double q_clicks = 0.0, q_revenue = 0.0;
    for (const ClickSession* s : grouped[qi]) {
      for (std::size_t r = 0; r < s->items.size(); ++r) {
        if (!s->clicks[r]) continue;
        const int item = s->items[r];
        if (new_pos[item] > cutoff) continue;
        const Item& it = q.items[item];
        // Keep the realised relevance outcome; swap the examination term.
        const double ratio = oracle.attention_prob(it.features, new_pos[item]) /
                             oracle.attention_prob(it.features, static_cast<int>(r) + 1);
        q_clicks += ratio;
        q_revenue += ratio * it.utility_value;
      }
    }
    const double inv = 1.0 / static_cast<double>(grouped[qi].size());
    out.clicks += q_clicks * inv;
    out.revenue += q_revenue * inv;
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("debiased_at_k: no sessions");
  out.clicks /= static_cast<double>(counted);
  out.revenue /= static_cast<double>(counted);
  return out;
}

double mean_average_precision(const Dataset& data, const Rankings& rankings,
                              int* n_skipped) {
  check_rankings(data, rankings);
  double total = 0.0;
  int counted = 0, skipped = 0;
  for (std::size_t qi = 0; qi < data.queries.size(); ++qi) {
    const QueryGroup& q = data.queries[qi];
    int n_rel = 0;
    for (const Item& it : q.items) n_rel += it.relevance >= 1 ? 1 : 0;
    if (n_rel == 0) {
      ++skipped;
      continue;
    }
    double ap = 0.0;
    int hits = 0;
    for (std::size_t r = 0; r < rankings[qi].size(); ++r) {
      if (q.items[rankings[qi][r]].relevance >= 1) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(r + 1);
      }
    }
    total += ap / static_cast<double>(n_rel);
    ++counted;
  }
  if (n_skipped) *n_skipped = skipped;
  if (counted == 0) throw std::invalid_argument("map: no query has relevant documents");
  return total / static_cast<double>(counted);
}

double mean_ndcg_at_k(const Dataset& data, const Rankings& rankings, int k,
                      int* n_skipped) {
  check_rankings(data, rankings);
  if (k < 1) throw std::invalid_argument("ndcg: cutoff must be >= 1");
  double total = 0.0;
  int counted = 0, skipped = 0;
  for (std::size_t qi = 0; qi < data.queries.size(); ++qi) {
    const QueryGroup& q = data.queries[qi];
    const int depth = std::min<int>(k, static_cast<int>(q.items.size()));
    std::vector<int> grades(q.items.size());
    for (std::size_t i = 0; i < q.items.size(); ++i) grades[i] = q.items[i].relevance;
    std::vector<int> ideal = grades;
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0, dcg = 0.0;
    for (int r = 0; r < depth; ++r) {
      const double disc = 1.0 / std::log2(static_cast<double>(r) + 2.0);
      idcg += (std::exp2(static_cast<double>(ideal[r])) - 1.0) * disc;
      dcg += (std::exp2(static_cast<double>(grades[rankings[qi][r]])) - 1.0) * disc;
    }
    if (idcg <= 0.0) {
      ++skipped;
      continue;
    }
    total += dcg / idcg;
    ++counted;
  }
  if (n_skipped) *n_skipped = skipped;
  if (counted == 0) throw std::invalid_argument("ndcg: every query has zero ideal gain");
  return total / static_cast<double>(counted);
}

std::vector<double> position_click_distribution(const ClickModel& model,
                                                const Dataset& data,
                                                const Rankings& rankings, int k_max) {
  check_rankings(data, rankings);
  const int depth = std::min(k_max, model.max_position());
  if (depth < 1) throw std::invalid_argument("position distribution: bad depth");
  std::vector<double> sums(depth, 0.0);
  std::vector<std::size_t> counts(depth, 0);
  for (std::size_t qi = 0; qi < data.queries.size(); ++qi) {
    const QueryGroup& q = data.queries[qi];
    const int shown = std::min<int>(static_cast<int>(q.items.size()), depth);
    for (int r = 0; r < shown; ++r) {
      sums[r] += model.click_prob(q.items[rankings[qi][r]], r + 1);
      ++counts[r];
    }
  }
  for (int r = 0; r < depth; ++r)
    sums[r] = counts[r] ? sums[r] / static_cast<double>(counts[r]) : 0.0;
  return sums;
}

PairedTTest paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired_ttest: size mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("paired_ttest: need at least two pairs");
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double var = ss / static_cast<double>(n - 1);

  PairedTTest out;
  out.dof = static_cast<int>(n) - 1;
  out.mean_diff = mean;
  if (var == 0.0) {
    // Identical per-query values: no evidence either way.
    out.t = mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity() * (mean > 0 ? 1 : -1);
    out.p = mean == 0.0 ? 1.0 : 0.0;
    return out;
  }
  out.t = mean / std::sqrt(var / static_cast<double>(n));
  boost::math::students_t dist(static_cast<double>(out.dof));
  out.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t)));
  return out;
}

}  // namespace urank
