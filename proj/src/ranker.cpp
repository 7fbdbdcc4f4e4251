#include "urank/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "urank/logistic.hpp"
#include "urank/rng.hpp"

namespace urank {

UtilityTable UtilityTable::zeros(int n_items, int k_max) {
  if (n_items < 1 || k_max < 1)
    throw std::invalid_argument("utility table: dimensions must be positive");
  UtilityTable t;
  t.n_items = n_items;
  t.k_max = k_max;
  t.u.assign(static_cast<std::size_t>(n_items) * k_max, 0.0);
  return t;
}

bool UtilityTable::row_monotone(int item, double tol) const {
  for (int k = 1; k < k_max; ++k)
    if (at(item, k + 1) > at(item, k) + tol) return false;
  // The implicit zero tail must not exceed the last real column.
  return at(item, k_max) >= -tol;
}

bool UtilityTable::all_rows_monotone(double tol) const {
  for (int i = 0; i < n_items; ++i)
    if (!row_monotone(i, tol)) return false;
  return true;
}

nlohmann::json UtilityTable::to_json() const {
  return {{"n_items", n_items}, {"k_max", k_max}, {"u", u}};
}

UtilityTable UtilityTable::from_json(const nlohmann::json& j) {
  UtilityTable t;
  t.n_items = j.at("n_items").get<int>();
  t.k_max = j.at("k_max").get<int>();
  t.u = j.at("u").get<std::vector<double>>();
  if (t.u.size() != static_cast<std::size_t>(t.n_items) * t.k_max)
    throw std::invalid_argument("utility table: shape mismatch");
  return t;
}

UtilityTable build_utility_table(const std::vector<const ClickSession*>& sessions,
                                 const ClickModel& ctr, const QueryGroup& query) {
  const int n = static_cast<int>(query.items.size());
  const int k_max = ctr.max_position();
  UtilityTable t = UtilityTable::zeros(n, k_max);
  if (sessions.empty()) return t;

  // Per-item inverse-propensity click mass: mean over sessions of
  // click / ctr(logged position). One pass over the log, then a single
  // sweep over target positions per item.
  std::vector<double> mass(n, 0.0);
  for (const ClickSession* s : sessions) {
    if (s->query_id != query.query_id)
      throw std::invalid_argument("utility table: session from a different query");
    if (static_cast<int>(s->items.size()) > k_max)
      throw std::invalid_argument("utility table: session shows positions beyond k_max");
    for (std::size_t r = 0; r < s->items.size(); ++r) {
      if (!s->clicks[r]) continue;
      const int item = s->items[r];
      if (item < 0 || item >= n)
        throw std::invalid_argument("utility table: session references unknown item");
      mass[item] += 1.0 / ctr.click_prob(query.items[item], static_cast<int>(r) + 1);
    }
  }
  const double inv_sessions = 1.0 / static_cast<double>(sessions.size());
  for (int i = 0; i < n; ++i) {
    if (mass[i] == 0.0) continue;
    const double scale = mass[i] * inv_sessions * query.items[i].utility_value;
    for (int k = 1; k <= k_max; ++k)
      t.cell(i, k) = scale * ctr.click_prob(query.items[i], k);
  }
  return t;
}

std::vector<UtilityTable> build_utility_tables(const std::vector<ClickSession>& sessions,
                                               const ClickModel& ctr, const Dataset& data) {
  const auto grouped = group_sessions(sessions, data);
  std::vector<UtilityTable> tables;
  tables.reserve(data.queries.size());
  for (std::size_t qi = 0; qi < data.queries.size(); ++qi)
    tables.push_back(build_utility_table(grouped[qi], ctr, data.queries[qi]));
  return tables;
}

double delta_util(const UtilityTable& t, int i, int j, int k_i, int k_j) {
  if (k_i < 1 || k_j < 1) throw std::out_of_range("delta_util: positions are 1-based");
  return t.at(i, k_j) + t.at(j, k_i) - t.at(i, k_i) - t.at(j, k_j);
}

double ScoringModel::raw_score(const Item& item) const {
  std::vector<double> x(item.features.size() + 1);
  std::copy(item.features.begin(), item.features.end(), x.begin());
  x.back() = item.utility_value;
  return net.forward(x)[0];
}

double ScoringModel::score(const Item& item) const {
  return std::clamp(raw_score(item), -score_bound, score_bound);
}

std::vector<int> ScoringModel::rank(const QueryGroup& query) const {
  const int n = static_cast<int>(query.items.size());
  std::vector<double> s(n);
  for (int i = 0; i < n; ++i) s[i] = score(query.items[i]);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (s[a] != s[b]) return s[a] > s[b];
    return query.items[a].item_id < query.items[b].item_id;
  });
  std::vector<int> ids(n);
  for (int r = 0; r < n; ++r) ids[r] = query.items[order[r]].item_id;
  return ids;
}

nlohmann::json ScoringModel::to_json() const {
  return {{"schema_version", 1},
          {"kind", "scoring_model"},
          {"sigma", sigma},
          {"score_bound", score_bound},
          {"net", net.to_json()}};
}

ScoringModel ScoringModel::from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "scoring_model")
    throw std::invalid_argument("scoring model: unexpected document kind");
  ScoringModel m;
  m.sigma = j.at("sigma").get<double>();
  m.score_bound = j.at("score_bound").get<double>();
  m.net = Mlp::from_json(j.at("net"));
  return m;
}

void save_scoring_model(const ScoringModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << m.to_json().dump(2) << '\n';
}

ScoringModel load_scoring_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  nlohmann::json j;
  in >> j;
  return ScoringModel::from_json(j);
}

double urank_pair_loss(std::span<const double> s, std::span<const int> k,
                       const UtilityTable& t, double sigma,
                       std::vector<double>* grad_s) {
  const int n = static_cast<int>(s.size());
  if (static_cast<int>(k.size()) != n || t.n_items != n)
    throw std::invalid_argument("urank loss: size mismatch");
  if (grad_s) grad_s->assign(n, 0.0);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (k[j] >= k[i]) continue;  // j must sit strictly above i
      const double w = delta_util(t, i, j, k[i], k[j]);
      if (w == 0.0) continue;
      const double margin = sigma * (s[i] - s[j]);
      loss += w * log2_logistic(margin);
      if (grad_s) {
        const double d = w * log2_logistic_deriv(margin) * sigma;
        (*grad_s)[i] += d;
        (*grad_s)[j] -= d;
      }
    }
  }
  return loss;
}

nlohmann::json BoundSnapshot::to_json() const {
  return {{"q", query_id},     {"epoch", epoch},
          {"sigma", sigma},    {"score_bound", score_bound},
          {"scores", scores},  {"positions", positions},
          {"table", table.to_json()}};
}

BoundSnapshot BoundSnapshot::from_json(const nlohmann::json& j) {
  BoundSnapshot s;
  s.query_id = j.at("q").get<std::string>();
  s.epoch = j.at("epoch").get<int>();
  s.sigma = j.at("sigma").get<double>();
  s.score_bound = j.at("score_bound").get<double>();
  s.scores = j.at("scores").get<std::vector<double>>();
  s.positions = j.at("positions").get<std::vector<int>>();
  s.table = UtilityTable::from_json(j.at("table"));
  if (s.scores.size() != s.positions.size() ||
      static_cast<int>(s.scores.size()) != s.table.n_items)
    throw std::invalid_argument("bound snapshot: shape mismatch");
  return s;
}

void write_snapshots_jsonl(const std::vector<BoundSnapshot>& snaps,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << nlohmann::json{{"schema_version", 1}, {"kind", "bound_snapshots"}}.dump() << '\n';
  for (const auto& s : snaps) out << s.to_json().dump() << '\n';
}

std::vector<BoundSnapshot> read_snapshots_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  if (nlohmann::json::parse(line).value("kind", "") != "bound_snapshots")
    throw std::runtime_error(path.string() + ": not a snapshot file");
  std::vector<BoundSnapshot> snaps;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    snaps.push_back(BoundSnapshot::from_json(nlohmann::json::parse(line)));
  }
  return snaps;
}

nlohmann::json UrankTrainReport::to_json() const {
  nlohmann::json per_epoch = nlohmann::json::array();
  for (const auto& e : epochs)
    per_epoch.push_back({{"epoch", e.epoch},
                         {"loss", e.loss},
                         {"estimated_utility", e.estimated_utility}});
  return {{"schema_version", 1},
          {"kind", "urank_train_report"},
          {"epochs", std::move(per_epoch)},
          {"n_snapshots", snapshots.size()}};
}

namespace {

// Positions induced by clipped scores: positions[item] = 1-based rank.
std::vector<int> positions_from_scores(const QueryGroup& q,
                                       const std::vector<double>& s) {
  const int n = static_cast<int>(q.items.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (s[a] != s[b]) return s[a] > s[b];
    return a < b;
  });
  std::vector<int> pos(n);
  for (int r = 0; r < n; ++r) pos[order[r]] = r + 1;
  return pos;
}

}  // namespace

ScoringModel train_urank(const Dataset& data, const std::vector<ClickSession>& sessions,
                         const ClickModel& ctr, const UrankTrainConfig& cfg,
                         UrankTrainReport* report) {
  if (cfg.epochs < 0) throw std::invalid_argument("train_urank: negative epochs");
  if (cfg.rerank_every < 1)
    throw std::invalid_argument("train_urank: rerank_every must be >= 1");
  if (!(cfg.score_bound > 0.0))
    throw std::invalid_argument("train_urank: score_bound must be positive");
  if (!(cfg.sigma > 0.0)) throw std::invalid_argument("train_urank: sigma must be positive");

  const auto tables = build_utility_tables(sessions, ctr, data);

  ScoringModel model;
  model.sigma = cfg.sigma;
  model.score_bound = cfg.score_bound;
  std::vector<int> dims{data.feature_dim + 1};
  dims.insert(dims.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
  dims.push_back(1);
  model.net = Mlp(dims, mix_seed(cfg.seed, fnv1a("urank-init")));

  const std::size_t n_queries = data.queries.size();
  std::vector<std::vector<int>> frozen_pos(n_queries);

  auto clipped_scores = [&](const QueryGroup& q) {
    std::vector<double> s(q.items.size());
    for (std::size_t i = 0; i < q.items.size(); ++i) s[i] = model.score(q.items[i]);
    return s;
  };

  auto total_estimated_utility = [&]() {
    double total = 0.0;
    for (std::size_t qi = 0; qi < n_queries; ++qi) {
      const auto s = clipped_scores(data.queries[qi]);
      const auto pos = positions_from_scores(data.queries[qi], s);
      for (std::size_t i = 0; i < pos.size(); ++i)
        total += tables[qi].at(static_cast<int>(i), pos[i]);
    }
    return total;
  };

  std::vector<std::size_t> query_order(n_queries);
  std::iota(query_order.begin(), query_order.end(), 0);
  MlpGrad grad = model.net.zero_grad();
  std::vector<std::vector<double>> trace;
  std::vector<double> grad_s;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if ((epoch - 1) % cfg.rerank_every == 0) {
      // E-step: freeze the ranking each query's items currently get.
      for (std::size_t qi = 0; qi < n_queries; ++qi) {
        const auto s = clipped_scores(data.queries[qi]);
        frozen_pos[qi] = positions_from_scores(data.queries[qi], s);
        if (report && cfg.snapshot_queries > 0 &&
            qi < static_cast<std::size_t>(cfg.snapshot_queries)) {
          report->snapshots.push_back({data.queries[qi].query_id, epoch, cfg.sigma,
                                       cfg.score_bound, s, frozen_pos[qi], tables[qi]});
        }
      }
    }

    Rng order_rng(stage_seed(cfg.seed, "urank-epoch", static_cast<std::uint64_t>(epoch)));
    order_rng.shuffle(query_order);

    double epoch_loss = 0.0;
    for (std::size_t qi : query_order) {
      const QueryGroup& q = data.queries[qi];
      const int n = static_cast<int>(q.items.size());
      std::vector<double> raw(n), s(n);
      std::vector<std::vector<std::vector<double>>> traces(n);
      std::vector<std::vector<double>> inputs(n);
      for (int i = 0; i < n; ++i) {
        auto& x = inputs[i];
        x.resize(q.items[i].features.size() + 1);
        std::copy(q.items[i].features.begin(), q.items[i].features.end(), x.begin());
        x.back() = q.items[i].utility_value;
        raw[i] = model.net.forward(x, &traces[i])[0];
        s[i] = std::clamp(raw[i], -cfg.score_bound, cfg.score_bound);
      }
      const double loss =
          urank_pair_loss(s, frozen_pos[qi], tables[qi], cfg.sigma, &grad_s);
      if (!std::isfinite(loss))
        throw std::runtime_error("train_urank: non-finite loss, training diverged");
      epoch_loss += loss;

      grad.zero();
      for (int i = 0; i < n; ++i) {
        // Clipping renders saturated scores locally flat; drop their grads.
        if (std::abs(raw[i]) >= cfg.score_bound || grad_s[i] == 0.0) continue;
        model.net.backward(inputs[i], traces[i], std::span(&grad_s[i], 1), grad);
      }
      if (!grad.finite())
        throw std::runtime_error("train_urank: non-finite gradient, training diverged");
      model.net.sgd_step(grad, cfg.learning_rate);
    }

    if (report)
      report->epochs.push_back({epoch, epoch_loss, total_estimated_utility()});
  }
  return model;
}

}  // namespace urank
