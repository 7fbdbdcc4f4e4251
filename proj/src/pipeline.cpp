#include "urank/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "urank/baselines.hpp"
#include "urank/bounds.hpp"
#include "urank/click_sim.hpp"
#include "urank/ctr_model.hpp"
#include "urank/eval.hpp"
#include "urank/kernels.hpp"
#include "urank/letor.hpp"
#include "urank/matching.hpp"
#include "urank/ranker.hpp"
#include "urank/rng.hpp"

namespace urank {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& ctx, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(ctx + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw ConfigError("unknown config key '" + ctx + "." + key + "'");
}

template <typename T>
void read_field(const json& j, const std::string& ctx, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + ctx + "." + std::string(key) + "' has the wrong type");
  }
}

json bid_to_json(const BidConfig& b) {
  return {{"kind", b.kind}, {"value", b.value}, {"low", b.low}, {"high", b.high}};
}

}  // namespace

json ExperimentConfig::to_json() const {
  return {
      {"master_seed", master_seed},
      {"output_dir", output_dir},
      {"data",
       {{"source", data.source},
        {"n_train_queries", data.n_train_queries},
        {"n_test_queries", data.n_test_queries},
        {"n_docs", data.n_docs},
        {"feature_dim", data.feature_dim},
        {"y_max", data.y_max},
        {"bid", bid_to_json(data.bid)},
        {"train_path", data.train_path},
        {"test_path", data.test_path}}},
      {"click",
       {{"eta", click.eta},
        {"epsilon", click.epsilon},
        {"k_max", click.k_max},
        {"policy", click.policy},
        {"pretrain_label_fraction", click.pretrain_label_fraction},
        {"train_sessions_per_query", click.train_sessions_per_query},
        {"test_sessions_per_query", click.test_sessions_per_query}}},
      {"ctr",
       {{"architecture", ctr.architecture},
        {"hidden", ctr.hidden},
        {"learning_rate", ctr.learning_rate},
        {"epochs", ctr.epochs},
        {"batch_size", ctr.batch_size},
        {"validation_fraction", ctr.validation_fraction}}},
      {"ranker",
       {{"hidden", ranker.hidden},
        {"learning_rate", ranker.learning_rate},
        {"epochs", ranker.epochs},
        {"rerank_every", ranker.rerank_every},
        {"sigma", ranker.sigma},
        {"score_bound", ranker.score_bound},
        {"snapshot_queries", ranker.snapshot_queries}}},
      {"lambdarank",
       {{"hidden", lambdarank.hidden},
        {"learning_rate", lambdarank.learning_rate},
        {"epochs", lambdarank.epochs},
        {"sigma", lambdarank.sigma},
        {"score_bound", lambdarank.score_bound}}},
      {"baselines", baselines},
      {"eval", {{"ndcg_k", eval.ndcg_k}, {"top_k", eval.top_k}}},
  };
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig cfg;
  check_keys(j, "config",
             {"master_seed", "output_dir", "data", "click", "ctr", "ranker", "lambdarank",
              "baselines", "eval"});
  read_field(j, "config", "master_seed", cfg.master_seed);
  read_field(j, "config", "output_dir", cfg.output_dir);
  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, "data",
               {"source", "n_train_queries", "n_test_queries", "n_docs", "feature_dim",
                "y_max", "bid", "train_path", "test_path"});
    read_field(d, "data", "source", cfg.data.source);
    read_field(d, "data", "n_train_queries", cfg.data.n_train_queries);
    read_field(d, "data", "n_test_queries", cfg.data.n_test_queries);
    read_field(d, "data", "n_docs", cfg.data.n_docs);
    read_field(d, "data", "feature_dim", cfg.data.feature_dim);
    read_field(d, "data", "y_max", cfg.data.y_max);
    read_field(d, "data", "train_path", cfg.data.train_path);
    read_field(d, "data", "test_path", cfg.data.test_path);
    if (d.contains("bid")) {
      const auto& b = d.at("bid");
      check_keys(b, "data.bid", {"kind", "value", "low", "high"});
      read_field(b, "data.bid", "kind", cfg.data.bid.kind);
      read_field(b, "data.bid", "value", cfg.data.bid.value);
      read_field(b, "data.bid", "low", cfg.data.bid.low);
      read_field(b, "data.bid", "high", cfg.data.bid.high);
    }
  }
  if (j.contains("click")) {
    const auto& c = j.at("click");
    check_keys(c, "click",
               {"eta", "epsilon", "k_max", "policy", "pretrain_label_fraction",
                "train_sessions_per_query", "test_sessions_per_query"});
    read_field(c, "click", "eta", cfg.click.eta);
    read_field(c, "click", "epsilon", cfg.click.epsilon);
    read_field(c, "click", "k_max", cfg.click.k_max);
    read_field(c, "click", "policy", cfg.click.policy);
    read_field(c, "click", "pretrain_label_fraction", cfg.click.pretrain_label_fraction);
    read_field(c, "click", "train_sessions_per_query", cfg.click.train_sessions_per_query);
    read_field(c, "click", "test_sessions_per_query", cfg.click.test_sessions_per_query);
  }
  if (j.contains("ctr")) {
    const auto& c = j.at("ctr");
    check_keys(c, "ctr",
               {"architecture", "hidden", "learning_rate", "epochs", "batch_size",
                "validation_fraction"});
    read_field(c, "ctr", "architecture", cfg.ctr.architecture);
    read_field(c, "ctr", "hidden", cfg.ctr.hidden);
    read_field(c, "ctr", "learning_rate", cfg.ctr.learning_rate);
    read_field(c, "ctr", "epochs", cfg.ctr.epochs);
    read_field(c, "ctr", "batch_size", cfg.ctr.batch_size);
    read_field(c, "ctr", "validation_fraction", cfg.ctr.validation_fraction);
  }
  if (j.contains("ranker")) {
    const auto& r = j.at("ranker");
    check_keys(r, "ranker",
               {"hidden", "learning_rate", "epochs", "rerank_every", "sigma", "score_bound",
                "snapshot_queries"});
    read_field(r, "ranker", "hidden", cfg.ranker.hidden);
    read_field(r, "ranker", "learning_rate", cfg.ranker.learning_rate);
    read_field(r, "ranker", "epochs", cfg.ranker.epochs);
    read_field(r, "ranker", "rerank_every", cfg.ranker.rerank_every);
    read_field(r, "ranker", "sigma", cfg.ranker.sigma);
    read_field(r, "ranker", "score_bound", cfg.ranker.score_bound);
    read_field(r, "ranker", "snapshot_queries", cfg.ranker.snapshot_queries);
  }
  if (j.contains("lambdarank")) {
    const auto& r = j.at("lambdarank");
    check_keys(r, "lambdarank",
               {"hidden", "learning_rate", "epochs", "sigma", "score_bound"});
    read_field(r, "lambdarank", "hidden", cfg.lambdarank.hidden);
    read_field(r, "lambdarank", "learning_rate", cfg.lambdarank.learning_rate);
    read_field(r, "lambdarank", "epochs", cfg.lambdarank.epochs);
    read_field(r, "lambdarank", "sigma", cfg.lambdarank.sigma);
    read_field(r, "lambdarank", "score_bound", cfg.lambdarank.score_bound);
  }
  read_field(j, "config", "baselines", cfg.baselines);
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    check_keys(e, "eval", {"ndcg_k", "top_k"});
    read_field(e, "eval", "ndcg_k", cfg.eval.ndcg_k);
    read_field(e, "eval", "top_k", cfg.eval.top_k);
  }
  return cfg;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config error: " + msg); };
  if (output_dir.empty()) fail("output_dir must not be empty");

  if (data.source != "synthetic" && data.source != "letor")
    fail("data.source must be 'synthetic' or 'letor'");
  if (data.source == "synthetic") {
    if (data.n_train_queries < 1) fail("data.n_train_queries must be >= 1");
    if (data.n_test_queries < 1) fail("data.n_test_queries must be >= 1");
    if (data.n_docs < 1) fail("data.n_docs must be >= 1");
    if (data.feature_dim < 1) fail("data.feature_dim must be >= 1");
  } else {
    if (data.train_path.empty()) fail("data.train_path required for letor source");
    if (data.test_path.empty()) fail("data.test_path required for letor source");
    if (data.feature_dim < 1) fail("data.feature_dim must be >= 1");
  }
  if (data.y_max < 1) fail("data.y_max must be >= 1");
  if (data.bid.kind != "constant" && data.bid.kind != "uniform")
    fail("data.bid.kind must be 'constant' or 'uniform'");
  if (data.bid.kind == "constant" && !(data.bid.value >= 0.0))
    fail("data.bid.value must be >= 0");
  if (data.bid.kind == "uniform" && !(data.bid.low >= 0.0 && data.bid.low <= data.bid.high))
    fail("data.bid.low/high must satisfy 0 <= low <= high");

  if (!(click.eta > 0.0)) fail("click.eta must be positive");
  if (!(click.epsilon >= 0.0 && click.epsilon < 1.0)) fail("click.epsilon must be in [0, 1)");
  if (click.k_max < 1) fail("click.k_max must be >= 1");
  try {
    parse_policy_kind(click.policy);
  } catch (const std::exception&) {
    fail("click.policy is not a known logging policy");
  }
  if (!(click.pretrain_label_fraction > 0.0 && click.pretrain_label_fraction <= 1.0))
    fail("click.pretrain_label_fraction must be in (0, 1]");
  if (click.train_sessions_per_query < 1) fail("click.train_sessions_per_query must be >= 1");
  if (click.test_sessions_per_query < 1) fail("click.test_sessions_per_query must be >= 1");

  try {
    parse_ctr_architecture(ctr.architecture);
  } catch (const std::exception&) {
    fail("ctr.architecture must be 'a1' or 'a2'");
  }
  for (int h : ctr.hidden)
    if (h < 1) fail("ctr.hidden sizes must be >= 1");
  if (!(ctr.learning_rate > 0.0)) fail("ctr.learning_rate must be positive");
  if (ctr.epochs < 0) fail("ctr.epochs must be >= 0");
  if (ctr.batch_size < 1) fail("ctr.batch_size must be >= 1");
  if (!(ctr.validation_fraction >= 0.0 && ctr.validation_fraction < 1.0))
    fail("ctr.validation_fraction must be in [0, 1)");

  for (int h : ranker.hidden)
    if (h < 1) fail("ranker.hidden sizes must be >= 1");
  if (!(ranker.learning_rate > 0.0)) fail("ranker.learning_rate must be positive");
  if (ranker.epochs < 0) fail("ranker.epochs must be >= 0");
  if (ranker.rerank_every < 1) fail("ranker.rerank_every must be >= 1");
  if (!(ranker.sigma > 0.0)) fail("ranker.sigma must be positive");
  if (!(ranker.score_bound > 0.0)) fail("ranker.score_bound must be positive");
  if (ranker.snapshot_queries < 0) fail("ranker.snapshot_queries must be >= 0");

  for (int h : lambdarank.hidden)
    if (h < 1) fail("lambdarank.hidden sizes must be >= 1");
  if (!(lambdarank.learning_rate > 0.0)) fail("lambdarank.learning_rate must be positive");
  if (lambdarank.epochs < 0) fail("lambdarank.epochs must be >= 0");
  if (!(lambdarank.sigma > 0.0)) fail("lambdarank.sigma must be positive");
  if (!(lambdarank.score_bound > 0.0)) fail("lambdarank.score_bound must be positive");

  for (const auto& b : baselines) {
    try {
      parse_baseline_kind(b);
    } catch (const std::exception&) {
      fail("unknown baseline '" + b + "'");
    }
  }
  if (eval.ndcg_k < 1) fail("eval.ndcg_k must be >= 1");
  for (int k : eval.top_k)
    if (k < 1) fail("eval.top_k entries must be >= 1");
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(to_json().dump())));
  return buf;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  if (const char* env = std::getenv("URANK_OUTPUT_DIR"); env && *env)
    cfg.output_dir = env;
  cfg.validate();
  return cfg;
}

ArtifactPaths::ArtifactPaths(const std::filesystem::path& out_dir)
    : root(out_dir),
      resolved_config(out_dir / "config.resolved.json"),
      train_data(out_dir / "data" / "train.letor"),
      test_data(out_dir / "data" / "test.letor"),
      oracle(out_dir / "data" / "oracle.json"),
      train_sessions(out_dir / "sessions" / "train.jsonl"),
      test_sessions(out_dir / "sessions" / "test.jsonl"),
      ctr_model(out_dir / "models" / "ctr.json"),
      ctr_report(out_dir / "reports" / "ctr_train.json"),
      urank_model(out_dir / "models" / "urank.json"),
      urank_report(out_dir / "reports" / "urank_train.json"),
      snapshots(out_dir / "reports" / "bound_snapshots.jsonl"),
      naive_model(out_dir / "models" / "naive_lambdarank.json"),
      ips_model(out_dir / "models" / "ips_lambdarank.json"),
      eval_report(out_dir / "reports" / "eval.json"),
      position_csv(out_dir / "reports" / "position_ctr.csv"),
      query_dump(out_dir / "reports" / "query_detail.csv"),
      bound_json(out_dir / "reports" / "bounds.json"),
      bound_csv(out_dir / "reports" / "bounds.csv"),
      arch_comparison(out_dir / "reports" / "arch_comparison.json") {}

namespace {

void ensure_parent(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
}

bool all_exist(std::initializer_list<std::filesystem::path> paths) {
  for (const auto& p : paths)
    if (!std::filesystem::exists(p)) return false;
  return true;
}

void require_artifact(const std::filesystem::path& p, const char* producer) {
  if (!std::filesystem::exists(p))
    throw std::runtime_error("missing artifact " + p.string() + "; run the '" +
                             std::string(producer) + "' stage first");
}

BidSpec bid_spec_of(const ExperimentConfig& cfg) {
  BidSpec spec;
  spec.kind = cfg.data.bid.kind == "constant" ? BidKind::constant : BidKind::uniform;
  spec.value = cfg.data.bid.value;
  spec.low = cfg.data.bid.low;
  spec.high = cfg.data.bid.high;
  return spec;
}

LoggingPolicy policy_of(const ExperimentConfig& cfg, const Dataset& train) {
  const PolicyKind kind = parse_policy_kind(cfg.click.policy);
  if (kind == PolicyKind::pretrained_pointwise)
    return make_pretrained_policy(train, cfg.click.pretrain_label_fraction,
                                  stage_seed(cfg.master_seed, "policy-pretrain"));
  return LoggingPolicy{kind, nullptr};
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

void stage_data(const ExperimentConfig& cfg, bool force) {
  const ArtifactPaths paths(cfg.output_dir);
  if (!force &&
      all_exist({paths.resolved_config, paths.train_data, paths.test_data, paths.oracle}))
    return;

  Dataset train, test;
  if (cfg.data.source == "synthetic") {
    const BidSpec bids = bid_spec_of(cfg);
    train = generate_synthetic(cfg.data.n_train_queries, cfg.data.n_docs,
                               cfg.data.feature_dim, cfg.data.y_max,
                               stage_seed(cfg.master_seed, "data-train"), bids);
    test = generate_synthetic(cfg.data.n_test_queries, cfg.data.n_docs,
                              cfg.data.feature_dim, cfg.data.y_max,
                              stage_seed(cfg.master_seed, "data-test"), bids);
    // Synthetic queries get distinct ids across the two splits.
    for (auto& q : test.queries) q.query_id = "t" + q.query_id;
  } else {
    train = parse_letor(cfg.data.train_path, cfg.data.feature_dim, cfg.data.y_max);
    test = parse_letor(cfg.data.test_path, cfg.data.feature_dim, cfg.data.y_max);
  }

  ensure_parent(paths.train_data);
  write_letor(train, paths.train_data);
  write_letor(test, paths.test_data);

  const auto oracle = OracleClickModel::sample(cfg.data.feature_dim, cfg.click.eta,
                                               cfg.click.epsilon, cfg.data.y_max,
                                               cfg.click.k_max,
                                               stage_seed(cfg.master_seed, "oracle"));
  ensure_parent(paths.oracle);
  save_click_model(oracle, paths.oracle);

  json resolved = cfg.to_json();
  resolved["config_hash"] = cfg.hash();
  write_json_file(resolved, paths.resolved_config);
}

void stage_simulate(const ExperimentConfig& cfg, bool force) {
  const ArtifactPaths paths(cfg.output_dir);
  if (!force && all_exist({paths.train_sessions, paths.test_sessions})) return;
  require_artifact(paths.train_data, "data");
  require_artifact(paths.test_data, "data");
  require_artifact(paths.oracle, "data");

  const Dataset train = parse_letor(paths.train_data, cfg.data.feature_dim, cfg.data.y_max);
  const Dataset test = parse_letor(paths.test_data, cfg.data.feature_dim, cfg.data.y_max);
  const auto oracle = load_click_model(paths.oracle);
  const LoggingPolicy policy = policy_of(cfg, train);

  const auto train_sessions =
      simulate_sessions(train, oracle, policy, cfg.click.train_sessions_per_query,
                        stage_seed(cfg.master_seed, "sim-train"));
  const auto test_sessions =
      simulate_sessions(test, oracle, policy, cfg.click.test_sessions_per_query,
                        stage_seed(cfg.master_seed, "sim-test"));
  ensure_parent(paths.train_sessions);
  write_sessions_jsonl(train_sessions, paths.train_sessions);
  write_sessions_jsonl(test_sessions, paths.test_sessions);
}

void stage_train_ctr(const ExperimentConfig& cfg, bool force) {
  const ArtifactPaths paths(cfg.output_dir);
  if (!force && all_exist({paths.ctr_model, paths.ctr_report})) return;
  require_artifact(paths.train_data, "data");
  require_artifact(paths.train_sessions, "simulate");

  const Dataset train = parse_letor(paths.train_data, cfg.data.feature_dim, cfg.data.y_max);
  const auto sessions = read_sessions_jsonl(paths.train_sessions);

  CtrTrainConfig tc;
  tc.hidden_sizes = cfg.ctr.hidden;
  tc.learning_rate = cfg.ctr.learning_rate;
  tc.epochs = cfg.ctr.epochs;
  tc.batch_size = cfg.ctr.batch_size;
  tc.validation_fraction = cfg.ctr.validation_fraction;
  tc.seed = stage_seed(cfg.master_seed, "ctr-train");

  CtrTrainReport report;
  const CtrModel model = train_ctr(sessions, train,
                                   parse_ctr_architecture(cfg.ctr.architecture), tc, &report);
  ensure_parent(paths.ctr_model);
  save_ctr_model(model, paths.ctr_model);
  json rj = report.to_json();
  rj["architecture"] = cfg.ctr.architecture;
  rj["config_hash"] = cfg.hash();
  write_json_file(rj, paths.ctr_report);
}

void stage_train_rankers(const ExperimentConfig& cfg, bool force) {
  const ArtifactPaths paths(cfg.output_dir);
  const bool want_naive = std::count(cfg.baselines.begin(), cfg.baselines.end(),
                                     "naive_lambdarank") > 0;
  const bool want_ips =
      std::count(cfg.baselines.begin(), cfg.baselines.end(), "ips_lambdarank") > 0;

  std::vector<std::filesystem::path> outputs{paths.urank_model, paths.urank_report,
                                             paths.snapshots};
  if (want_naive) outputs.push_back(paths.naive_model);
  if (want_ips) outputs.push_back(paths.ips_model);
  if (!force && std::all_of(outputs.begin(), outputs.end(), [](const auto& p) {
        return std::filesystem::exists(p);
      }))
    return;

  require_artifact(paths.train_data, "data");
  require_artifact(paths.train_sessions, "simulate");
  require_artifact(paths.ctr_model, "train-ctr");

  const Dataset train = parse_letor(paths.train_data, cfg.data.feature_dim, cfg.data.y_max);
  const auto sessions = read_sessions_jsonl(paths.train_sessions);
  const CtrModel ctr = load_ctr_model(paths.ctr_model);

  UrankTrainConfig uc;
  uc.hidden_sizes = cfg.ranker.hidden;
  uc.learning_rate = cfg.ranker.learning_rate;
  uc.epochs = cfg.ranker.epochs;
  uc.rerank_every = cfg.ranker.rerank_every;
  uc.sigma = cfg.ranker.sigma;
  uc.score_bound = cfg.ranker.score_bound;
  uc.snapshot_queries = cfg.ranker.snapshot_queries;
  uc.seed = stage_seed(cfg.master_seed, "urank-train");

  UrankTrainReport report;
  const ScoringModel urank = train_urank(train, sessions, ctr, uc, &report);
  ensure_parent(paths.urank_model);
  save_scoring_model(urank, paths.urank_model);
  json rj = report.to_json();
  rj["config_hash"] = cfg.hash();
  write_json_file(rj, paths.urank_report);
  ensure_parent(paths.snapshots);
  write_snapshots_jsonl(report.snapshots, paths.snapshots);

  LambdaRankConfig lc;
  lc.hidden_sizes = cfg.lambdarank.hidden;
  lc.learning_rate = cfg.lambdarank.learning_rate;
  lc.epochs = cfg.lambdarank.epochs;
  lc.sigma = cfg.lambdarank.sigma;
  lc.score_bound = cfg.lambdarank.score_bound;

  if (want_naive) {
    lc.seed = stage_seed(cfg.master_seed, "naive-train");
    save_scoring_model(train_naive_lambdarank(sessions, train, lc), paths.naive_model);
  }
  if (want_ips) {
    require_artifact(paths.oracle, "data");
    const auto oracle = load_click_model(paths.oracle);
    lc.seed = stage_seed(cfg.master_seed, "ips-train");
    save_scoring_model(train_ips_lambdarank(sessions, train, oracle, lc), paths.ips_model);
  }
}

namespace {

Rankings rank_all(const ScoringModel& model, const Dataset& data) {
  Rankings out;
  out.reserve(data.queries.size());
  for (const auto& q : data.queries) out.push_back(model.rank(q));
  return out;
}

}  // namespace

void stage_evaluate(const ExperimentConfig& cfg, bool force) {
  const ArtifactPaths paths(cfg.output_dir);
  if (!force && all_exist({paths.eval_report, paths.position_csv, paths.query_dump}))
    return;
  require_artifact(paths.test_data, "data");
  require_artifact(paths.oracle, "data");
  require_artifact(paths.test_sessions, "simulate");
  require_artifact(paths.ctr_model, "train-ctr");
  require_artifact(paths.urank_model, "train-ranker");

  const Dataset test = parse_letor(paths.test_data, cfg.data.feature_dim, cfg.data.y_max);
  const auto oracle = load_click_model(paths.oracle);
  const auto test_sessions = read_sessions_jsonl(paths.test_sessions);
  const CtrModel ctr = load_ctr_model(paths.ctr_model);

  // Method order is fixed: the main ranker, then baselines as configured.
  std::vector<std::pair<std::string, Rankings>> methods;
  methods.emplace_back("u_rank", rank_all(load_scoring_model(paths.urank_model), test));
  for (const auto& name : cfg.baselines) {
    const BaselineKind kind = parse_baseline_kind(name);
    Rankings r;
    switch (kind) {
      case BaselineKind::naive_lambdarank:
        require_artifact(paths.naive_model, "train-ranker");
        r = rank_all(load_scoring_model(paths.naive_model), test);
        break;
      case BaselineKind::ips_lambdarank:
        require_artifact(paths.ips_model, "train-ranker");
        r = rank_all(load_scoring_model(paths.ips_model), test);
        break;
      case BaselineKind::ctr_at_1:
        for (const auto& q : test.queries) r.push_back(rank_ctr_at_1(ctr, q));
        break;
      case BaselineKind::km_oracle:
        for (const auto& q : test.queries) r.push_back(rank_km(oracle, q, cfg.click.k_max));
        break;
      case BaselineKind::km_estimated:
        for (const auto& q : test.queries) r.push_back(rank_km(ctr, q, cfg.click.k_max));
        break;
    }
    methods.emplace_back(name, std::move(r));
  }

  const auto urank_clicks = per_query_expected_clicks(oracle, test, methods.front().second);

  json method_metrics = json::object();
  int map_skipped = 0, ndcg_skipped = 0;
  for (const auto& [name, rankings] : methods) {
    const auto util = oracle_utility(oracle, test, rankings);
    json m{{"clicks_per_query", util.clicks_per_query},
           {"revenue_per_query", util.revenue_per_query},
           {"ctr_per_doc", util.ctr_per_doc},
           {"map", mean_average_precision(test, rankings, &map_skipped)},
           {"ndcg", mean_ndcg_at_k(test, rankings, cfg.eval.ndcg_k, &ndcg_skipped)}};
    int n_clamped = 0;
    m["estimated_utility"] = estimated_utility(test_sessions, ctr, test, rankings, &n_clamped);
    m["estimated_utility_clamped_denominators"] = n_clamped;

    json at_k = json::object();
    std::vector<int> cutoffs = cfg.eval.top_k;
    cutoffs.push_back(cfg.click.k_max);  // untruncated variant
    for (int k : cutoffs) {
      const auto d = debiased_at_k(test_sessions, oracle, test, rankings, k);
      at_k[std::to_string(k)] = {{"clicks", d.clicks}, {"revenue", d.revenue}};
    }
    m["debiased_at_k"] = std::move(at_k);

    if (name != "u_rank") {
      const auto clicks = per_query_expected_clicks(oracle, test, rankings);
      const auto tt = paired_ttest(urank_clicks, clicks);
      m["ttest_vs_u_rank"] = {
          {"t", tt.t}, {"p", tt.p}, {"dof", tt.dof}, {"mean_diff", tt.mean_diff}};
    }
    method_metrics[name] = std::move(m);
  }

  json report{{"schema_version", 1},
              {"kind", "eval_report"},
              {"config_hash", cfg.hash()},
              {"kernel_backend", kernels::backend_name(kernels::active_backend())},
              {"ctr_architecture", cfg.ctr.architecture},
              {"ctr_denominator", "expected clicks divided by placed documents "
                                  "(top min(n_docs, k_max) per query)"},
              {"n_test_queries", test.queries.size()},
              {"map_skipped_queries", map_skipped},
              {"ndcg_skipped_queries", ndcg_skipped},
              {"methods", std::move(method_metrics)}};
  write_json_file(report, paths.eval_report);

  // Per-position average true click probability, one row per method.
  {
    ensure_parent(paths.position_csv);
    std::ofstream out(paths.position_csv);
    if (!out) throw std::runtime_error("cannot write " + paths.position_csv.string());
    out << "position,avg_ctr,method\n";
    char buf[128];
    for (const auto& [name, rankings] : methods) {
      const auto dist = position_click_distribution(oracle, test, rankings, cfg.click.k_max);
      for (std::size_t p = 0; p < dist.size(); ++p) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%s\n", p + 1, dist[p], name.c_str());
        out << buf;
      }
    }
  }

  // Single-query detail dump: where each method puts every item of the
  // first test query, plus the item's true click-probability curve.
  {
    ensure_parent(paths.query_dump);
    std::ofstream out(paths.query_dump);
    if (!out) throw std::runtime_error("cannot write " + paths.query_dump.string());
    const QueryGroup& q = test.queries.front();
    out << "method,item,grade,bid,position";
    const int depth = std::min<int>(static_cast<int>(q.items.size()), cfg.click.k_max);
    for (int k = 1; k <= depth; ++k) out << ",click_prob_" << k;
    out << '\n';
    char buf[64];
    for (const auto& [name, rankings] : methods) {
      std::vector<int> pos(q.items.size());
      for (std::size_t r = 0; r < rankings.front().size(); ++r)
        pos[rankings.front()[r]] = static_cast<int>(r) + 1;
      for (std::size_t i = 0; i < q.items.size(); ++i) {
        out << name << ',' << i << ',' << q.items[i].relevance << ','
            << q.items[i].utility_value << ',' << pos[i];
        for (int k = 1; k <= depth; ++k) {
          std::snprintf(buf, sizeof buf, ",%.17g", oracle.click_prob(q.items[i], k));
          out << buf;
        }
        out << '\n';
      }
    }
  }
}

void stage_verify_bounds(const ExperimentConfig& cfg, bool force) {
  const ArtifactPaths paths(cfg.output_dir);
  if (!force && all_exist({paths.bound_json, paths.bound_csv})) return;
  require_artifact(paths.snapshots, "train-ranker");

  const auto snaps = read_snapshots_jsonl(paths.snapshots);
  const BoundReport report = verify_bounds(snaps);
  json rj = report.to_json();
  rj["config_hash"] = cfg.hash();
  rj["lemma_indicator_min_slack"] =
      lemma_indicator_slack(cfg.ranker.sigma, cfg.ranker.score_bound, 10000);
  rj["lemma_complement_min_slack"] =
      lemma_complement_slack(cfg.ranker.sigma, cfg.ranker.score_bound, 10000);
  ensure_parent(paths.bound_json);
  write_json_file(rj, paths.bound_json);
  write_bound_report_csv(report, paths.bound_csv);
}

int run_pipeline(const ExperimentConfig& cfg, bool force) {
  cfg.validate();
  struct Stage {
    const char* name;
    void (*fn)(const ExperimentConfig&, bool);
  };
  const Stage stages[] = {
      {"data", stage_data},           {"simulate", stage_simulate},
      {"train-ctr", stage_train_ctr}, {"train-ranker", stage_train_rankers},
      {"evaluate", stage_evaluate},   {"verify-bounds", stage_verify_bounds},
  };
  for (const auto& stage : stages) {
    try {
      stage.fn(cfg, force);
    } catch (const std::exception& e) {
      std::cerr << "stage " << stage.name << " failed: " << e.what() << '\n';
      return 2;
    }
  }
  return 0;
}

std::vector<ArchComparisonRow> compare_ctr_architectures(const ExperimentConfig& cfg) {
  const ArtifactPaths paths(cfg.output_dir);
  stage_data(cfg);
  stage_simulate(cfg);

  const Dataset train = parse_letor(paths.train_data, cfg.data.feature_dim, cfg.data.y_max);
  const Dataset test = parse_letor(paths.test_data, cfg.data.feature_dim, cfg.data.y_max);
  const auto oracle = load_click_model(paths.oracle);
  const auto train_sessions = read_sessions_jsonl(paths.train_sessions);
  const auto test_sessions = read_sessions_jsonl(paths.test_sessions);

  std::vector<ArchComparisonRow> rows;
  for (const auto arch : {CtrArchitecture::a1, CtrArchitecture::a2}) {
    CtrTrainConfig tc;
    tc.hidden_sizes = cfg.ctr.hidden;
    tc.learning_rate = cfg.ctr.learning_rate;
    tc.epochs = cfg.ctr.epochs;
    tc.batch_size = cfg.ctr.batch_size;
    tc.validation_fraction = cfg.ctr.validation_fraction;
    tc.seed = stage_seed(cfg.master_seed, "ctr-train");

    const CtrModel model = train_ctr(train_sessions, train, arch, tc);

    UrankTrainConfig uc;
    uc.hidden_sizes = cfg.ranker.hidden;
    uc.learning_rate = cfg.ranker.learning_rate;
    uc.epochs = cfg.ranker.epochs;
    uc.rerank_every = cfg.ranker.rerank_every;
    uc.sigma = cfg.ranker.sigma;
    uc.score_bound = cfg.ranker.score_bound;
    uc.seed = stage_seed(cfg.master_seed, "urank-train");
    const ScoringModel ranker = train_urank(train, train_sessions, model, uc);

    ArchComparisonRow row;
    row.architecture = to_string(arch);
    row.train_auc = auc(model, train_sessions, train);
    row.test_auc = auc(model, test_sessions, test);
    row.urank_clicks = oracle_utility(oracle, test, rank_all(ranker, test)).clicks_per_query;
    rows.push_back(std::move(row));
  }

  json table = json::array();
  for (const auto& r : rows)
    table.push_back({{"architecture", r.architecture},
                     {"train_auc", r.train_auc},
                     {"test_auc", r.test_auc},
                     {"urank_clicks_per_query", r.urank_clicks}});
  write_json_file({{"schema_version", 1},
                   {"kind", "arch_comparison"},
                   {"config_hash", cfg.hash()},
                   {"rows", std::move(table)}},
                  paths.arch_comparison);
  return rows;
}

}  // namespace urank
