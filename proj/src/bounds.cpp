#include "urank/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "urank/logistic.hpp"
#include "urank/matching.hpp"

namespace urank {

double bound_c1(double sigma, double score_bound) {
  // Score differences live in [-2C, 2C], hence the 2 in the exponent.
  return std::max(softplus(2.0 * sigma * score_bound) * kInvLn2, 2.0);
}

BoundCheck verify_bound_snapshot(const BoundSnapshot& snap) {
  const int n = static_cast<int>(snap.scores.size());
  if (n == 0) throw std::invalid_argument("bound check: empty snapshot");
  if (static_cast<int>(snap.positions.size()) != n || snap.table.n_items != n)
    throw std::invalid_argument("bound check: shape mismatch");
  {
    std::vector<int> sorted = snap.positions;
    std::sort(sorted.begin(), sorted.end());
    for (int r = 0; r < n; ++r)
      if (sorted[r] != r + 1)
        throw std::invalid_argument("bound check: positions are not a permutation of 1..n");
  }
  for (double s : snap.scores)
    if (std::abs(s) > snap.score_bound + 1e-12)
      throw std::invalid_argument("bound check: score outside the clip range");

  BoundCheck out;
  out.query_id = snap.query_id;
  out.epoch = snap.epoch;
  out.monotone = snap.table.all_rows_monotone();
  for (int i = 0; i < n && !out.score_ties; ++i)
    for (int j = i + 1; j < n; ++j)
      if (snap.scores[i] == snap.scores[j]) {
        out.score_ties = true;
        break;
      }
  if (!out.score_ties) {
    // The chain assumes k is the ranking the scores induce; anything
    // else is a malformed snapshot, not a counterexample.
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (snap.scores[i] > snap.scores[j] && snap.positions[i] > snap.positions[j])
          throw std::invalid_argument("bound check: positions disagree with scores");
  }

  const UtilityTable& t = snap.table;
  const auto& k = snap.positions;
  const auto& s = snap.scores;

  // Regret against the assignment-optimal placement.
  WeightMatrix w = WeightMatrix::zeros(n, std::min(n, t.k_max));
  for (int i = 0; i < n; ++i)
    for (int p = 1; p <= w.n_positions; ++p) w.at(i, p - 1) = t.at(i, p);
  double frozen_utility = 0.0;
  for (int i = 0; i < n; ++i) frozen_utility += t.at(i, k[i]);
  out.l_regret = km_match(w).total_weight - frozen_utility;

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (s[i] < s[j]) out.l_hinge += std::abs(t.at(i, k[j]) - t.at(i, k[i]));

  out.l_loss = urank_pair_loss(s, k, t, snap.sigma);

  out.c1 = bound_c1(snap.sigma, snap.score_bound);
  double drop = 0.0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (k[i] > k[j]) drop += t.at(j, k[j]) - t.at(j, k[i]);
  out.c2 = out.c1 * drop;

  out.slack_hinge = out.l_hinge - out.l_regret;
  out.slack_loss = out.l_loss + out.c2 - out.l_hinge;
  out.checked = out.monotone && !out.score_ties;
  out.violated = out.checked && (out.slack_hinge < -kBoundTolerance ||
                                 out.slack_loss < -kBoundTolerance);
  return out;
}

BoundReport verify_bounds(const std::vector<BoundSnapshot>& snaps) {
  BoundReport report;
  report.min_slack_hinge = std::numeric_limits<double>::infinity();
  report.min_slack_loss = std::numeric_limits<double>::infinity();
  for (const auto& snap : snaps) {
    BoundCheck c = verify_bound_snapshot(snap);
    if (c.checked) {
      ++report.n_checked;
      report.min_slack_hinge = std::min(report.min_slack_hinge, c.slack_hinge);
      report.min_slack_loss = std::min(report.min_slack_loss, c.slack_loss);
      if (c.violated) ++report.n_violations;
    } else if (!c.monotone) {
      ++report.n_skipped_nonmonotone;
    } else {
      ++report.n_skipped_ties;
    }
    report.checks.push_back(std::move(c));
  }
  if (report.n_checked == 0) {
    report.min_slack_hinge = 0.0;
    report.min_slack_loss = 0.0;
  }
  return report;
}

nlohmann::json BoundReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : checks)
    rows.push_back({{"q", c.query_id},
                    {"epoch", c.epoch},
                    {"l_regret", c.l_regret},
                    {"l_hinge", c.l_hinge},
                    {"l_loss", c.l_loss},
                    {"c1", c.c1},
                    {"c2", c.c2},
                    {"slack_hinge", c.slack_hinge},
                    {"slack_loss", c.slack_loss},
                    {"monotone", c.monotone},
                    {"score_ties", c.score_ties},
                    {"checked", c.checked},
                    {"violated", c.violated}});
  return {{"schema_version", 1},
          {"kind", "bound_report"},
          {"n_checked", n_checked},
          {"n_skipped_nonmonotone", n_skipped_nonmonotone},
          {"n_skipped_ties", n_skipped_ties},
          {"n_violations", n_violations},
          {"min_slack_hinge", min_slack_hinge},
          {"min_slack_loss", min_slack_loss},
          {"checks", std::move(rows)}};
}

void write_bound_report_json(const BoundReport& report,
                             const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << report.to_json().dump(2) << '\n';
}

void write_bound_report_csv(const BoundReport& report,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "query_id,epoch,l_regret,l_hinge,l_loss,c1,c2,slack_hinge,slack_loss,"
         "monotone,score_ties,checked,violated\n";
  char buf[512];
  for (const auto& c : report.checks) {
    std::snprintf(buf, sizeof buf,
                  "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,%d,%d\n",
                  c.query_id.c_str(), c.epoch, c.l_regret, c.l_hinge, c.l_loss, c.c1,
                  c.c2, c.slack_hinge, c.slack_loss, c.monotone ? 1 : 0,
                  c.score_ties ? 1 : 0, c.checked ? 1 : 0, c.violated ? 1 : 0);
    out << buf;
  }
}

BoundSnapshot random_monotone_snapshot(int n_items, int k_max, double sigma,
                                       double score_bound, Rng& rng) {
  if (n_items < 1 || k_max < 1)
    throw std::invalid_argument("random snapshot: dimensions must be positive");
  BoundSnapshot snap;
  snap.query_id = "random";
  snap.epoch = 0;
  snap.sigma = sigma;
  snap.score_bound = score_bound;
  snap.table = UtilityTable::zeros(n_items, k_max);
  for (int i = 0; i < n_items; ++i) {
    if (rng.uniform() < 0.3) continue;  // never-clicked item: zero row
    const double scale = rng.uniform(0.1, 2.0);
    std::vector<double> row(k_max);
    for (double& v : row) v = scale * rng.uniform();
    std::sort(row.begin(), row.end(), std::greater<>());
    for (int p = 1; p <= k_max; ++p) snap.table.cell(i, p) = row[p - 1];
  }

  snap.scores.resize(n_items);
  for (int i = 0; i < n_items; ++i) {
    bool fresh = false;
    while (!fresh) {
      snap.scores[i] = rng.uniform(-score_bound, score_bound);
      fresh = true;
      for (int j = 0; j < i; ++j)
        if (snap.scores[j] == snap.scores[i]) fresh = false;
    }
  }

  std::vector<int> order(n_items);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return snap.scores[a] > snap.scores[b]; });
  snap.positions.resize(n_items);
  for (int r = 0; r < n_items; ++r) snap.positions[order[r]] = r + 1;
  return snap;
}

double lemma_indicator_slack(double sigma, double score_bound, int grid_points) {
  if (grid_points < 2) throw std::invalid_argument("lemma grid: need >= 2 points");
  double min_slack = std::numeric_limits<double>::infinity();
  for (int t = 0; t < grid_points; ++t) {
    const double x = -score_bound + 2.0 * score_bound * t / (grid_points - 1);
    const double slack = log2_logistic(sigma * x) - (x <= 0.0 ? 1.0 : 0.0);
    min_slack = std::min(min_slack, slack);
  }
  return min_slack;
}

double lemma_complement_slack(double sigma, double score_bound, int grid_points) {
  if (grid_points < 2) throw std::invalid_argument("lemma grid: need >= 2 points");
  const double cap = std::max(softplus(sigma * score_bound) * kInvLn2, 2.0);
  double min_slack = std::numeric_limits<double>::infinity();
  for (int t = 0; t < grid_points; ++t) {
    const double x = -score_bound + 2.0 * score_bound * t / (grid_points - 1);
    const double slack = cap - log2_logistic(sigma * x) - (x >= 0.0 ? 1.0 : 0.0);
    min_slack = std::min(min_slack, slack);
  }
  return min_slack;
}

}  // namespace urank
