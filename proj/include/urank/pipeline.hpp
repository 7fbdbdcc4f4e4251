#pragma once

// Config-driven experiment pipeline:
//   data -> simulate -> train-ctr -> train-rankers -> evaluate -> verify-bounds
// Every stage reads and writes files under the configured output
// directory, so each is independently re-runnable; existing artifacts
// are reused unless `force` is set. All randomness is derived from the
// master seed through named stage streams.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace urank {

// Invalid or malformed configuration; the CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BidConfig {
  std::string kind = "constant";  // constant | uniform
  double value = 1.0;
  double low = 0.5;
  double high = 2.0;
};

struct DataConfig {
  std::string source = "synthetic";  // synthetic | letor
  int n_train_queries = 500;
  int n_test_queries = 100;
  int n_docs = 10;
  int feature_dim = 20;
  int y_max = 4;
  BidConfig bid;
  std::string train_path;  // letor source only
  std::string test_path;
};

struct ClickSimConfig {
  double eta = 1.0;
  double epsilon = 0.1;
  int k_max = 10;
  std::string policy = "pretrained_pointwise";
  double pretrain_label_fraction = 0.01;
  int train_sessions_per_query = 40;
  int test_sessions_per_query = 20;
};

struct CtrConfig {
  std::string architecture = "a1";
  std::vector<int> hidden{64, 32};
  double learning_rate = 0.05;
  int epochs = 20;
  int batch_size = 128;
  double validation_fraction = 0.1;
};

struct RankerStageConfig {
  std::vector<int> hidden{32, 16};
  double learning_rate = 0.02;
  int epochs = 40;
  int rerank_every = 1;
  double sigma = 1.0;
  double score_bound = 5.0;
  int snapshot_queries = 4;
};

struct LambdaStageConfig {
  std::vector<int> hidden{32, 16};
  double learning_rate = 0.02;
  int epochs = 40;
  double sigma = 1.0;
  double score_bound = 5.0;
};

struct EvalStageConfig {
  int ndcg_k = 10;
  std::vector<int> top_k{1, 3, 5};
};

struct ExperimentConfig {
  std::uint64_t master_seed = 17;
  std::string output_dir = "out";
  DataConfig data;
  ClickSimConfig click;
  CtrConfig ctr;
  RankerStageConfig ranker;
  LambdaStageConfig lambdarank;
  std::vector<std::string> baselines{"naive_lambdarank", "ips_lambdarank", "ctr_at_1",
                                     "km_oracle", "km_estimated"};
  EvalStageConfig eval;

  nlohmann::json to_json() const;
  // Starts from defaults; present keys override. Unknown keys raise
  // ConfigError (typo protection).
  static ExperimentConfig from_json(const nlohmann::json& j);
  void validate() const;  // throws ConfigError with a field-naming message

  // FNV-1a of the canonical JSON dump; stamped into every report.
  std::string hash() const;
};

// Reads + validates a config file. URANK_OUTPUT_DIR, when set,
// overrides output_dir (the only environment override).
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical artifact locations under the output directory.
struct ArtifactPaths {
  std::filesystem::path root;
  std::filesystem::path resolved_config;
  std::filesystem::path train_data, test_data;
  std::filesystem::path oracle;
  std::filesystem::path train_sessions, test_sessions;
  std::filesystem::path ctr_model, ctr_report;
  std::filesystem::path urank_model, urank_report, snapshots;
  std::filesystem::path naive_model, ips_model;
  std::filesystem::path eval_report, position_csv, query_dump;
  std::filesystem::path bound_json, bound_csv;
  std::filesystem::path arch_comparison;

  explicit ArtifactPaths(const std::filesystem::path& out_dir);
};

void stage_data(const ExperimentConfig& cfg, bool force = false);
void stage_simulate(const ExperimentConfig& cfg, bool force = false);
void stage_train_ctr(const ExperimentConfig& cfg, bool force = false);
void stage_train_rankers(const ExperimentConfig& cfg, bool force = false);
void stage_evaluate(const ExperimentConfig& cfg, bool force = false);
void stage_verify_bounds(const ExperimentConfig& cfg, bool force = false);

// All stages in order. Returns 0 on success, 2 when a stage fails (the
// diagnostic on stderr names the stage). Configuration problems throw
// ConfigError before any stage runs.
int run_pipeline(const ExperimentConfig& cfg, bool force = false);

// Trains both CTR architectures on the same sessions and reports their
// click AUC (train/test) plus the test #Click of the ranker each one
// induces. Writes the table to `arch_comparison` and returns it.
struct ArchComparisonRow {
  std::string architecture;
  double train_auc = 0.0;
  double test_auc = 0.0;
  double urank_clicks = 0.0;
};

std::vector<ArchComparisonRow> compare_ctr_architectures(const ExperimentConfig& cfg);

}  // namespace urank
