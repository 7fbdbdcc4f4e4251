#pragma once

// Position-aware click-through-rate estimation from logged sessions.
// Two architectures share one training path:
//   a1: net(features) -> one logit per position, sigmoid per slot
//   a2: net(features ++ onehot(position)) -> single logit
// Training only ever sees (features, logged position, click) triples;
// the model is then queried at arbitrary positions to fill utility
// tables, which is exactly the extrapolation the ranking stage needs.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "urank/click_model.hpp"
#include "urank/click_sim.hpp"
#include "urank/mlp.hpp"

namespace urank {

enum class CtrArchitecture { a1, a2 };

std::string to_string(CtrArchitecture arch);
CtrArchitecture parse_ctr_architecture(const std::string& name);

class CtrModel final : public ClickModel {
 public:
  CtrModel() = default;
  CtrModel(CtrArchitecture arch, int feature_dim, int k_max,
           const std::vector<int>& hidden_sizes, std::uint64_t seed);

  // Sigmoid of the position's logit, clamped to [1e-6, 1 - 1e-6] so
  // propensity ratios stay finite.
  double predict(std::span<const double> features, int position) const;
  std::vector<double> predict_all_positions(std::span<const double> features) const;

  double click_prob(const Item& item, int position) const override;
  int max_position() const override { return k_max_; }

  CtrArchitecture architecture() const { return arch_; }
  int feature_dim() const { return feature_dim_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  nlohmann::json to_json() const;
  static CtrModel from_json(const nlohmann::json& j);

 private:
  CtrArchitecture arch_ = CtrArchitecture::a1;
  int feature_dim_ = 0;
  int k_max_ = 0;
  Mlp net_;
};

void save_ctr_model(const CtrModel& model, const std::filesystem::path& path);
CtrModel load_ctr_model(const std::filesystem::path& path);

// One observed impression slot, the unit of CTR training.
struct CtrSample {
  int query_index = 0;
  int item_id = 0;
  int position = 0;  // 1-based logged position
  int click = 0;
};

std::vector<CtrSample> collect_ctr_samples(const std::vector<ClickSession>& sessions,
                                           const Dataset& data);

// Mean binary cross-entropy over `samples` (natural log); accumulates
// analytic parameter gradients into `grad` when non-null. Exposed so
// the finite-difference tests exercise the exact training gradient.
double ctr_loss(const CtrModel& model, const std::vector<CtrSample>& samples,
                const Dataset& data, MlpGrad* grad);

struct CtrTrainConfig {
  std::vector<int> hidden_sizes{64, 32};
  double learning_rate = 0.05;
  int epochs = 20;
  int batch_size = 128;
  double validation_fraction = 0.1;  // fraction of queries held out
  std::uint64_t seed = 1;
};

struct CtrEpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;  // NaN when no validation split
};

struct CtrTrainReport {
  std::vector<CtrEpochStats> epochs;
  double train_auc = 0.0;
  double val_auc = 0.0;
  nlohmann::json to_json() const;
};

// Mini-batch SGD on the observed triples. Throws on non-finite loss.
CtrModel train_ctr(const std::vector<ClickSession>& sessions, const Dataset& data,
                   CtrArchitecture arch, const CtrTrainConfig& cfg,
                   CtrTrainReport* report = nullptr);

// Area under the ROC curve; ties count half. Throws when `labels` is
// single-class (AUC undefined).
double rank_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// AUC of model predictions against the sessions' observed clicks.
double auc(const CtrModel& model, const std::vector<ClickSession>& sessions,
           const Dataset& data);

}  // namespace urank
