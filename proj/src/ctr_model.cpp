#include "urank/ctr_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "urank/logistic.hpp"
#include "urank/rng.hpp"

namespace urank {

namespace {
constexpr double kProbFloor = 1e-6;
}

std::string to_string(CtrArchitecture arch) {
  return arch == CtrArchitecture::a1 ? "a1" : "a2";
}

CtrArchitecture parse_ctr_architecture(const std::string& name) {
  if (name == "a1") return CtrArchitecture::a1;
  if (name == "a2") return CtrArchitecture::a2;
  throw std::invalid_argument("unknown ctr architecture: " + name);
}

CtrModel::CtrModel(CtrArchitecture arch, int feature_dim, int k_max,
                   const std::vector<int>& hidden_sizes, std::uint64_t seed)
    : arch_(arch), feature_dim_(feature_dim), k_max_(k_max) {
  if (feature_dim < 1) throw std::invalid_argument("ctr model: feature_dim must be >= 1");
  if (k_max < 1) throw std::invalid_argument("ctr model: k_max must be >= 1");
  std::vector<int> dims;
  dims.push_back(arch == CtrArchitecture::a1 ? feature_dim : feature_dim + k_max);
  dims.insert(dims.end(), hidden_sizes.begin(), hidden_sizes.end());
  dims.push_back(arch == CtrArchitecture::a1 ? k_max : 1);
  net_ = Mlp(dims, seed);
}

namespace {

// Input vector for the single-logit architecture: features ++ onehot(k).
std::vector<double> a2_input(std::span<const double> features, int position, int k_max) {
  std::vector<double> x(features.size() + static_cast<std::size_t>(k_max), 0.0);
  std::copy(features.begin(), features.end(), x.begin());
  x[features.size() + static_cast<std::size_t>(position - 1)] = 1.0;
  return x;
}

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

}  // namespace

double CtrModel::predict(std::span<const double> features, int position) const {
  if (position < 1 || position > k_max_)
    throw std::out_of_range("ctr model: position out of range");
  if (static_cast<int>(features.size()) != feature_dim_)
    throw std::invalid_argument("ctr model: feature size mismatch");
  double logit;
  if (arch_ == CtrArchitecture::a1) {
    logit = net_.forward(features)[position - 1];
  } else {
    logit = net_.forward(a2_input(features, position, k_max_))[0];
  }
  return clamp_prob(sigmoid(logit));
}

std::vector<double> CtrModel::predict_all_positions(std::span<const double> features) const {
  if (static_cast<int>(features.size()) != feature_dim_)
    throw std::invalid_argument("ctr model: feature size mismatch");
  std::vector<double> probs(k_max_);
  if (arch_ == CtrArchitecture::a1) {
    const auto logits = net_.forward(features);
    for (int k = 0; k < k_max_; ++k) probs[k] = clamp_prob(sigmoid(logits[k]));
  } else {
    for (int k = 1; k <= k_max_; ++k)
      probs[k - 1] = clamp_prob(sigmoid(net_.forward(a2_input(features, k, k_max_))[0]));
  }
  return probs;
}

double CtrModel::click_prob(const Item& item, int position) const {
  return predict(item.features, position);
}

nlohmann::json CtrModel::to_json() const {
  return {{"schema_version", 1},
          {"kind", "ctr_model"},
          {"architecture", to_string(arch_)},
          {"feature_dim", feature_dim_},
          {"k_max", k_max_},
          {"net", net_.to_json()}};
}

CtrModel CtrModel::from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "ctr_model")
    throw std::invalid_argument("ctr model: unexpected document kind");
  CtrModel m;
  m.arch_ = parse_ctr_architecture(j.at("architecture").get<std::string>());
  m.feature_dim_ = j.at("feature_dim").get<int>();
  m.k_max_ = j.at("k_max").get<int>();
  m.net_ = Mlp::from_json(j.at("net"));
  const int want_in =
      m.arch_ == CtrArchitecture::a1 ? m.feature_dim_ : m.feature_dim_ + m.k_max_;
  const int want_out = m.arch_ == CtrArchitecture::a1 ? m.k_max_ : 1;
  if (m.net_.input_dim() != want_in || m.net_.output_dim() != want_out)
    throw std::invalid_argument("ctr model: net shape inconsistent with architecture");
  return m;
}

void save_ctr_model(const CtrModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << model.to_json().dump(2) << '\n';
}

CtrModel load_ctr_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  nlohmann::json j;
  in >> j;
  return CtrModel::from_json(j);
}

std::vector<CtrSample> collect_ctr_samples(const std::vector<ClickSession>& sessions,
                                           const Dataset& data) {
  std::unordered_map<std::string, int> index;
  for (std::size_t qi = 0; qi < data.queries.size(); ++qi)
    index.emplace(data.queries[qi].query_id, static_cast<int>(qi));
  std::vector<CtrSample> samples;
  for (const auto& s : sessions) {
    const auto it = index.find(s.query_id);
    if (it == index.end())
      throw std::runtime_error("session references unknown query " + s.query_id);
    for (std::size_t r = 0; r < s.items.size(); ++r)
      samples.push_back({it->second, s.items[r], static_cast<int>(r) + 1,
                         static_cast<int>(s.clicks[r])});
  }
  return samples;
}

namespace {

// Cross-entropy on a raw logit; stable for any z. Derivative w.r.t. the
// logit is sigmoid(z) - click. Prediction-time clamping is deliberately
// absent here so the analytic gradient is exact.
double bce_from_logit(double z, int click) {
  return softplus(-z) + (1 - click) * z;
}

double loss_on(const CtrModel& model, std::span<const CtrSample> samples,
               const Dataset& data, MlpGrad* grad) {
  if (samples.empty()) throw std::invalid_argument("ctr loss: no samples");
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  const Mlp& net = model.net();
  const int k_max = model.max_position();
  double total = 0.0;
  std::vector<std::vector<double>> trace;
  std::vector<double> dout;
  for (const auto& s : samples) {
    const QueryGroup& q = data.queries[s.query_index];
    const auto& features = q.items[s.item_id].features;
    if (model.architecture() == CtrArchitecture::a1) {
      const auto logits = net.forward(features, grad ? &trace : nullptr);
      const double z = logits[s.position - 1];
      total += bce_from_logit(z, s.click);
      if (grad) {
        dout.assign(logits.size(), 0.0);
        dout[s.position - 1] = (sigmoid(z) - s.click) * inv_n;
        net.backward(features, trace, dout, *grad);
      }
    } else {
      const auto x = a2_input(features, s.position, k_max);
      const auto out = net.forward(x, grad ? &trace : nullptr);
      total += bce_from_logit(out[0], s.click);
      if (grad) {
        const double d = (sigmoid(out[0]) - s.click) * inv_n;
        net.backward(x, trace, std::span(&d, 1), *grad);
      }
    }
  }
  return total * inv_n;
}

}  // namespace

double ctr_loss(const CtrModel& model, const std::vector<CtrSample>& samples,
                const Dataset& data, MlpGrad* grad) {
  return loss_on(model, samples, data, grad);
}

double rank_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("auc: bad input sizes");
  std::size_t n_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("auc: labels must be 0/1");
    n_pos += static_cast<std::size_t>(y);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auc: undefined for single-class labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Rank-sum formulation; tied scores share their average rank.
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] == 1) pos_rank_sum += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double auc(const CtrModel& model, const std::vector<ClickSession>& sessions,
           const Dataset& data) {
  const auto samples = collect_ctr_samples(sessions, data);
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(samples.size());
  labels.reserve(samples.size());
  for (const auto& s : samples) {
    const QueryGroup& q = data.queries[s.query_index];
    scores.push_back(model.predict(q.items[s.item_id].features, s.position));
    labels.push_back(s.click);
  }
  return rank_auc(scores, labels);
}

nlohmann::json CtrTrainReport::to_json() const {
  nlohmann::json per_epoch = nlohmann::json::array();
  for (const auto& e : epochs) {
    nlohmann::json row{{"epoch", e.epoch}, {"train_loss", e.train_loss}};
    if (std::isfinite(e.val_auc)) row["val_auc"] = e.val_auc;
    per_epoch.push_back(std::move(row));
  }
  return {{"schema_version", 1},
          {"kind", "ctr_train_report"},
          {"epochs", std::move(per_epoch)},
          {"train_auc", train_auc},
          {"val_auc", val_auc}};
}

CtrModel train_ctr(const std::vector<ClickSession>& sessions, const Dataset& data,
                   CtrArchitecture arch, const CtrTrainConfig& cfg,
                   CtrTrainReport* report) {
  if (cfg.epochs < 0) throw std::invalid_argument("train_ctr: negative epochs");
  if (cfg.batch_size < 1) throw std::invalid_argument("train_ctr: batch_size must be >= 1");
  if (!(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0))
    throw std::invalid_argument("train_ctr: validation_fraction must be in [0, 1)");

  // Hold out whole queries, not random triples, so validation measures
  // generalisation rather than memorised impressions.
  std::vector<int> query_order(data.queries.size());
  std::iota(query_order.begin(), query_order.end(), 0);
  Rng split_rng(mix_seed(cfg.seed, fnv1a("ctr-val-split")));
  split_rng.shuffle(query_order);
  const std::size_t n_val =
      static_cast<std::size_t>(cfg.validation_fraction * data.queries.size());
  std::vector<char> is_val(data.queries.size(), 0);
  for (std::size_t i = 0; i < n_val; ++i) is_val[query_order[i]] = 1;

  auto all = collect_ctr_samples(sessions, data);
  std::vector<CtrSample> train, val;
  for (const auto& s : all)
    (is_val[s.query_index] ? val : train).push_back(s);
  if (train.empty()) throw std::invalid_argument("train_ctr: no training samples");

  // k_max is the deepest logged position; the model never needs more.
  int k_max = 0;
  for (const auto& s : all) k_max = std::max(k_max, s.position);
  if (k_max == 0) throw std::invalid_argument("train_ctr: sessions show no items");
  CtrModel model(arch, data.feature_dim, k_max, cfg.hidden_sizes,
                 mix_seed(cfg.seed, fnv1a("ctr-init")));

  auto val_auc_now = [&]() {
    if (val.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(val.size());
    labels.reserve(val.size());
    for (const auto& s : val) {
      const QueryGroup& q = data.queries[s.query_index];
      scores.push_back(model.predict(q.items[s.item_id].features, s.position));
      labels.push_back(s.click);
    }
    try {
      return rank_auc(scores, labels);
    } catch (const std::invalid_argument&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  MlpGrad grad = model.net().zero_grad();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng order_rng(stage_seed(cfg.seed, "ctr-epoch", static_cast<std::uint64_t>(epoch)));
    order_rng.shuffle(train);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len =
          std::min<std::size_t>(cfg.batch_size, train.size() - start);
      grad.zero();
      const double batch_loss =
          loss_on(model, std::span(train.data() + start, len), data, &grad);
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("train_ctr: non-finite loss, training diverged");
      model.net().sgd_step(grad, cfg.learning_rate);
      loss_sum += batch_loss * static_cast<double>(len);
    }
    if (report)
      report->epochs.push_back(
          {epoch, loss_sum / static_cast<double>(train.size()), val_auc_now()});
  }

  if (report) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& s : train) {
      const QueryGroup& q = data.queries[s.query_index];
      scores.push_back(model.predict(q.items[s.item_id].features, s.position));
      labels.push_back(s.click);
    }
    try {
      report->train_auc = rank_auc(scores, labels);
    } catch (const std::invalid_argument&) {
      report->train_auc = std::numeric_limits<double>::quiet_NaN();
    }
    report->val_auc = val_auc_now();
  }
  return model;
}

}  // namespace urank
