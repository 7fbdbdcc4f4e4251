#include "urank/click_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "urank/kernels.hpp"
#include "urank/rng.hpp"

namespace urank {

OracleClickModel::OracleClickModel(std::vector<double> attention_weights, double eta,
                                   double epsilon, int y_max, int k_max)
    : w_(std::move(attention_weights)), eta_(eta), epsilon_(epsilon), y_max_(y_max),
      k_max_(k_max) {
  validate();
}

void OracleClickModel::validate() const {
  if (w_.empty()) throw std::invalid_argument("click model: empty attention weights");
  if (!(eta_ > 0.0)) throw std::invalid_argument("click model: eta must be positive");
  if (!(epsilon_ >= 0.0 && epsilon_ < 1.0))
    throw std::invalid_argument("click model: epsilon must be in [0, 1)");
  if (y_max_ < 1) throw std::invalid_argument("click model: y_max must be >= 1");
  if (k_max_ < 1) throw std::invalid_argument("click model: k_max must be >= 1");
  double sum = 0.0;
  for (double v : w_) {
    // Mean subtraction can push entries up to 2*eta in magnitude.
    if (!(std::abs(v) <= 2.0 * eta_ + 1e-12))
      throw std::invalid_argument("click model: attention weight out of range");
    sum += v;
  }
  if (std::abs(sum) > 1e-9 * static_cast<double>(w_.size()))
    throw std::invalid_argument("click model: attention weights must sum to zero");
}

OracleClickModel OracleClickModel::sample(int feature_dim, double eta, double epsilon,
                                          int y_max, int k_max, std::uint64_t seed) {
  if (feature_dim < 1) throw std::invalid_argument("click model: feature_dim must be >= 1");
  Rng rng(seed);
  std::vector<double> w(feature_dim);
  for (double& v : w) v = rng.uniform(-eta, eta);
  const double mean = kernels::sum(w.data(), w.size()) / feature_dim;
  for (double& v : w) v -= mean;
  return OracleClickModel(std::move(w), eta, epsilon, y_max, k_max);
}

double OracleClickModel::attention_prob(std::span<const double> features,
                                        int position) const {
  if (position < 1 || position > k_max_)
    throw std::out_of_range("click model: position out of range");
  if (features.size() != w_.size())
    throw std::invalid_argument("click model: feature size mismatch");
  const double raw = kernels::dot(w_.data(), features.data(), w_.size()) + 1.0;
  const double expo = raw > 0.0 ? raw : 0.0;
  return std::pow(static_cast<double>(position), -expo);
}

double OracleClickModel::relevance_prob(int relevance) const {
  if (relevance < 0 || relevance > y_max_)
    throw std::out_of_range("click model: relevance grade out of range");
  const double gain = std::exp2(static_cast<double>(relevance)) - 1.0;
  const double max_gain = std::exp2(static_cast<double>(y_max_)) - 1.0;
  return epsilon_ + (1.0 - epsilon_) * gain / max_gain;
}

double OracleClickModel::click_prob(const Item& item, int position) const {
  return attention_prob(item.features, position) * relevance_prob(item.relevance);
}

nlohmann::json OracleClickModel::to_json() const {
  return {{"schema_version", 1},
          {"kind", "oracle_click_model"},
          {"attention_weights", w_},
          {"eta", eta_},
          {"epsilon", epsilon_},
          {"y_max", y_max_},
          {"k_max", k_max_}};
}

OracleClickModel OracleClickModel::from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "oracle_click_model")
    throw std::invalid_argument("click model: unexpected document kind");
  return OracleClickModel(j.at("attention_weights").get<std::vector<double>>(),
                          j.at("eta").get<double>(), j.at("epsilon").get<double>(),
                          j.at("y_max").get<int>(), j.at("k_max").get<int>());
}

void save_click_model(const OracleClickModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << model.to_json().dump(2) << '\n';
}

OracleClickModel load_click_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  nlohmann::json j;
  in >> j;
  return OracleClickModel::from_json(j);
}

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::random_shuffle: return "random_shuffle";
    case PolicyKind::relevance_sorted: return "relevance_sorted";
    case PolicyKind::pretrained_pointwise: return "pretrained_pointwise";
  }
  throw std::logic_error("unreachable");
}

PolicyKind parse_policy_kind(const std::string& name) {
  if (name == "random_shuffle") return PolicyKind::random_shuffle;
  if (name == "relevance_sorted") return PolicyKind::relevance_sorted;
  if (name == "pretrained_pointwise") return PolicyKind::pretrained_pointwise;
  throw std::invalid_argument("unknown logging policy: " + name);
}

LoggingPolicy make_pretrained_policy(const Dataset& data, double label_fraction,
                                     std::uint64_t seed) {
  if (!(label_fraction > 0.0 && label_fraction <= 1.0))
    throw std::invalid_argument("label_fraction must be in (0, 1]");
  // Collect the labelled sliver: at least one document per query.
  Rng rng(mix_seed(seed, fnv1a("pretrain-subsample")));
  std::vector<std::pair<const Item*, double>> labelled;
  for (const auto& q : data.queries) {
    std::vector<int> idx(q.items.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    const std::size_t take = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(label_fraction * q.items.size())));
    for (std::size_t i = 0; i < std::min(take, idx.size()); ++i) {
      const Item& it = q.items[idx[i]];
      labelled.emplace_back(&it, static_cast<double>(it.relevance) / data.y_max);
    }
  }

  auto net = std::make_shared<Mlp>(std::vector<int>{data.feature_dim, 16, 1},
                                   mix_seed(seed, fnv1a("pretrain-init")));
  // Plain SGD on squared error; this scorer is meant to be weak.
  Rng order_rng(mix_seed(seed, fnv1a("pretrain-order")));
  std::vector<std::size_t> order(labelled.size());
  std::iota(order.begin(), order.end(), 0);
  const int epochs = 30;
  const double lr = 0.05;
  MlpGrad g = net->zero_grad();
  std::vector<std::vector<double>> trace;
  for (int e = 0; e < epochs; ++e) {
    order_rng.shuffle(order);
    for (std::size_t s : order) {
      const auto& [item, target] = labelled[s];
      const auto out = net->forward(item->features, &trace);
      const double dout = 2.0 * (out[0] - target);
      g.zero();
      net->backward(item->features, trace, std::span(&dout, 1), g);
      net->sgd_step(g, lr);
    }
  }
  return LoggingPolicy{PolicyKind::pretrained_pointwise, std::move(net)};
}

std::vector<int> rank_by_policy(const LoggingPolicy& policy, const QueryGroup& query,
                                std::uint64_t seed) {
  const int n = static_cast<int>(query.items.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  switch (policy.kind) {
    case PolicyKind::random_shuffle: {
      Rng rng(seed);
      rng.shuffle(order);
      break;
    }
    case PolicyKind::relevance_sorted: {
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const Item& ia = query.items[a];
        const Item& ib = query.items[b];
        if (ia.relevance != ib.relevance) return ia.relevance > ib.relevance;
        return ia.item_id < ib.item_id;
      });
      break;
    }
    case PolicyKind::pretrained_pointwise: {
      if (!policy.scorer) throw std::invalid_argument("policy: missing pretrained scorer");
      std::vector<double> s(n);
      for (int i = 0; i < n; ++i) s[i] = policy.scorer->forward(query.items[i].features)[0];
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (s[a] != s[b]) return s[a] > s[b];
        return query.items[a].item_id < query.items[b].item_id;
      });
      break;
    }
  }
  std::vector<int> ids(n);
  for (int r = 0; r < n; ++r) ids[r] = query.items[order[r]].item_id;
  return ids;
}

int ClickSession::position_of(int item_id) const {
  for (std::size_t r = 0; r < items.size(); ++r)
    if (items[r] == item_id) return static_cast<int>(r) + 1;
  return 0;
}

std::vector<ClickSession> simulate_sessions(const Dataset& data, const ClickModel& model,
                                            const LoggingPolicy& policy,
                                            int sessions_per_query, std::uint64_t seed) {
  if (sessions_per_query < 1)
    throw std::invalid_argument("sessions_per_query must be >= 1");
  std::vector<ClickSession> out;
  out.reserve(data.queries.size() * static_cast<std::size_t>(sessions_per_query));
  const int k_max = model.max_position();
  for (std::size_t qi = 0; qi < data.queries.size(); ++qi) {
    const QueryGroup& q = data.queries[qi];
    const auto ranking = rank_by_policy(policy, q, stage_seed(seed, "policy", qi));
    const int shown = std::min<int>(static_cast<int>(ranking.size()), k_max);
    const std::uint64_t query_seed = stage_seed(seed, "clicks", qi);
    for (int s = 0; s < sessions_per_query; ++s) {
      Rng rng(mix_seed(query_seed, static_cast<std::uint64_t>(s)));
      ClickSession session;
      session.query_id = q.query_id;
      session.items.assign(ranking.begin(), ranking.begin() + shown);
      session.clicks.resize(shown);
      for (int r = 0; r < shown; ++r) {
        const double p = model.click_prob(q.items[session.items[r]], r + 1);
        session.clicks[r] = rng.bernoulli(p) ? 1 : 0;
      }
      out.push_back(std::move(session));
    }
  }
  return out;
}

void write_sessions_jsonl(const std::vector<ClickSession>& sessions,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << nlohmann::json{{"schema_version", 1}, {"kind", "click_sessions"}}.dump() << '\n';
  for (const auto& s : sessions) {
    nlohmann::json j{{"q", s.query_id}, {"items", s.items}};
    std::vector<int> clicks(s.clicks.begin(), s.clicks.end());
    j["clicks"] = clicks;
    out << j.dump() << '\n';
  }
}

std::vector<ClickSession> read_sessions_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  const auto header = nlohmann::json::parse(line);
  if (header.value("kind", "") != "click_sessions")
    throw std::runtime_error(path.string() + ": not a click session file");

  std::vector<ClickSession> sessions;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    ClickSession s;
    s.query_id = j.at("q").get<std::string>();
    s.items = j.at("items").get<std::vector<int>>();
    const auto clicks = j.at("clicks").get<std::vector<int>>();
    if (clicks.size() != s.items.size())
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": items/clicks length mismatch");
    s.clicks.reserve(clicks.size());
    for (int c : clicks) {
      if (c != 0 && c != 1)
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": clicks must be 0 or 1");
      s.clicks.push_back(static_cast<std::uint8_t>(c));
    }
    sessions.push_back(std::move(s));
  }
  return sessions;
}

std::vector<std::vector<const ClickSession*>> group_sessions(
    const std::vector<ClickSession>& sessions, const Dataset& data) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t qi = 0; qi < data.queries.size(); ++qi)
    index.emplace(data.queries[qi].query_id, qi);
  std::vector<std::vector<const ClickSession*>> grouped(data.queries.size());
  for (const auto& s : sessions) {
    const auto it = index.find(s.query_id);
    if (it == index.end())
      throw std::runtime_error("session references unknown query " + s.query_id);
    grouped[it->second].push_back(&s);
  }
  return grouped;
}

}  // namespace urank
