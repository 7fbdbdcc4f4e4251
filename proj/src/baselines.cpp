#include "urank/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "urank/logistic.hpp"
#include "urank/matching.hpp"
#include "urank/rng.hpp"

namespace urank {

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::naive_lambdarank: return "naive_lambdarank";
    case BaselineKind::ips_lambdarank: return "ips_lambdarank";
    case BaselineKind::ctr_at_1: return "ctr_at_1";
    case BaselineKind::km_oracle: return "km_oracle";
    case BaselineKind::km_estimated: return "km_estimated";
  }
  throw std::logic_error("unreachable");
}

BaselineKind parse_baseline_kind(const std::string& name) {
  if (name == "naive_lambdarank") return BaselineKind::naive_lambdarank;
  if (name == "ips_lambdarank") return BaselineKind::ips_lambdarank;
  if (name == "ctr_at_1") return BaselineKind::ctr_at_1;
  if (name == "km_oracle") return BaselineKind::km_oracle;
  if (name == "km_estimated") return BaselineKind::km_estimated;
  throw std::invalid_argument("unknown baseline: " + name);
}

namespace {

template <typename WeightFn>
std::vector<LabelledQuery> labels_from_sessions(const std::vector<ClickSession>& sessions,
                                                const Dataset& data, WeightFn weight) {
  const auto grouped = group_sessions(sessions, data);
  std::vector<LabelledQuery> out(data.queries.size());
  for (std::size_t qi = 0; qi < data.queries.size(); ++qi) {
    const QueryGroup& q = data.queries[qi];
    auto& labels = out[qi].labels;
    labels.assign(q.items.size(), 0.0);
    if (grouped[qi].empty()) continue;
    for (const ClickSession* s : grouped[qi]) {
      for (std::size_t r = 0; r < s->items.size(); ++r) {
        if (!s->clicks[r]) continue;
        const int item = s->items[r];
        labels[item] += weight(q.items[item], static_cast<int>(r) + 1);
      }
    }
    const double inv = 1.0 / static_cast<double>(grouped[qi].size());
    for (double& v : labels) v *= inv;
  }
  return out;
}

}  // namespace

std::vector<LabelledQuery> click_labels(const std::vector<ClickSession>& sessions,
                                        const Dataset& data) {
  return labels_from_sessions(sessions, data, [](const Item&, int) { return 1.0; });
}

std::vector<LabelledQuery> ips_click_labels(const std::vector<ClickSession>& sessions,
                                            const Dataset& data,
                                            const OracleClickModel& oracle) {
  return labels_from_sessions(sessions, data, [&](const Item& item, int pos) {
    return 1.0 / oracle.attention_prob(item.features, pos);
  });
}

double lambdarank_loss(std::span<const double> s, const LabelledQuery& lq, double sigma,
                       std::vector<double>* grad_s) {
  const int n = static_cast<int>(s.size());
  if (static_cast<int>(lq.labels.size()) != n)
    throw std::invalid_argument("lambdarank loss: size mismatch");
  if (grad_s) grad_s->assign(n, 0.0);

  // Ideal ranking: label desc, item id asc. Discounts follow from it.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (lq.labels[a] != lq.labels[b]) return lq.labels[a] > lq.labels[b];
    return a < b;
  });
  std::vector<double> discount(n);
  double max_dcg = 0.0;
  for (int r = 0; r < n; ++r) {
    discount[order[r]] = 1.0 / std::log2(2.0 + r);
    max_dcg += lq.labels[order[r]] * discount[order[r]];
  }
  if (max_dcg <= 0.0) return 0.0;  // no clicks, nothing to order

  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (lq.labels[i] <= lq.labels[j]) continue;
      const double swap = std::abs(lq.labels[i] - lq.labels[j]) *
                          std::abs(discount[i] - discount[j]) / max_dcg;
      if (swap == 0.0) continue;
      const double margin = sigma * (s[i] - s[j]);
      loss += swap * log2_logistic(margin);
      if (grad_s) {
        const double d = swap * log2_logistic_deriv(margin) * sigma;
        (*grad_s)[i] += d;
        (*grad_s)[j] -= d;
      }
    }
  }
  return loss;
}

ScoringModel train_pairwise_scorer(const Dataset& data,
                                   const std::vector<LabelledQuery>& labels,
                                   const LambdaRankConfig& cfg) {
  if (labels.size() != data.queries.size())
    throw std::invalid_argument("train_pairwise_scorer: label/query count mismatch");
  if (cfg.epochs < 0) throw std::invalid_argument("train_pairwise_scorer: negative epochs");

  ScoringModel model;
  model.sigma = cfg.sigma;
  model.score_bound = cfg.score_bound;
  std::vector<int> dims{data.feature_dim + 1};
  dims.insert(dims.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
  dims.push_back(1);
  model.net = Mlp(dims, mix_seed(cfg.seed, fnv1a("lambdarank-init")));

  std::vector<std::size_t> query_order(data.queries.size());
  std::iota(query_order.begin(), query_order.end(), 0);
  MlpGrad grad = model.net.zero_grad();
  std::vector<double> grad_s;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng order_rng(
        stage_seed(cfg.seed, "lambdarank-epoch", static_cast<std::uint64_t>(epoch)));
    order_rng.shuffle(query_order);
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
      const double loss = lambdarank_loss(s, labels[qi], cfg.sigma, &grad_s);
      if (!std::isfinite(loss))
        throw std::runtime_error("train_pairwise_scorer: non-finite loss");
      grad.zero();
      for (int i = 0; i < n; ++i) {
        if (std::abs(raw[i]) >= cfg.score_bound || grad_s[i] == 0.0) continue;
        model.net.backward(inputs[i], traces[i], std::span(&grad_s[i], 1), grad);
      }
      model.net.sgd_step(grad, cfg.learning_rate);
    }
  }
  return model;
}

ScoringModel train_naive_lambdarank(const std::vector<ClickSession>& sessions,
                                    const Dataset& data, const LambdaRankConfig& cfg) {
  return train_pairwise_scorer(data, click_labels(sessions, data), cfg);
}

ScoringModel train_ips_lambdarank(const std::vector<ClickSession>& sessions,
                                  const Dataset& data, const OracleClickModel& oracle,
                                  const LambdaRankConfig& cfg) {
  return train_pairwise_scorer(data, ips_click_labels(sessions, data, oracle), cfg);
}

std::vector<int> rank_ctr_at_1(const ClickModel& model, const QueryGroup& query) {
  const int n = static_cast<int>(query.items.size());
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i)
    v[i] = model.click_prob(query.items[i], 1) * query.items[i].utility_value;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (v[a] != v[b]) return v[a] > v[b];
    return query.items[a].item_id < query.items[b].item_id;
  });
  std::vector<int> ids(n);
  for (int r = 0; r < n; ++r) ids[r] = query.items[order[r]].item_id;
  return ids;
}

std::vector<int> rank_km(const ClickModel& model, const QueryGroup& query, int k_max) {
  const auto weights = WeightMatrix::from_click_model(model, query, k_max);
  return km_match(weights).as_ranking();
}

}  // namespace urank
