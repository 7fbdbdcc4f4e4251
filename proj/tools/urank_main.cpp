// Command-line front end: config-driven pipeline plus stage-by-stage
// subcommands operating on serialized artifacts.
//
// Exit codes: 0 success, 1 configuration/usage error, 2 stage failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "urank/bounds.hpp"
#include "urank/kernels.hpp"
#include "urank/matching.hpp"
#include "urank/pipeline.hpp"
#include "urank/ranker.hpp"

namespace {

urank::ExperimentConfig config_from(const std::string& path) {
  return urank::load_config(path);
}

int cmd_run(const std::string& config_path, bool force) {
  const auto cfg = config_from(config_path);
  const int rc = urank::run_pipeline(cfg, force);
  if (rc == 0) {
    const urank::ArtifactPaths paths(cfg.output_dir);
    std::ifstream in(paths.eval_report);
    nlohmann::json report;
    in >> report;
    std::printf("%-20s %12s %12s %10s %10s\n", "method", "clicks/query", "revenue",
                "map", "ndcg");
    for (const auto& [name, m] : report.at("methods").items())
      std::printf("%-20s %12.4f %12.4f %10.4f %10.4f\n", name.c_str(),
                  m.at("clicks_per_query").get<double>(),
                  m.at("revenue_per_query").get<double>(), m.at("map").get<double>(),
                  m.at("ndcg").get<double>());
    std::printf("artifacts: %s\n", cfg.output_dir.c_str());
  }
  return rc;
}

int run_stage(const std::string& config_path, bool force,
              void (*stage)(const urank::ExperimentConfig&, bool), const char* name) {
  const auto cfg = config_from(config_path);
  try {
    stage(cfg, force);
  } catch (const std::exception& e) {
    std::cerr << "stage " << name << " failed: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

int cmd_match(const std::string& matrix_path) {
  try {
    const auto weights = urank::read_weight_csv(matrix_path);
    const auto result = urank::km_match(weights);
    for (int i = 0; i < weights.n_items; ++i) {
      if (result.position_of_item[i] > 0)
        std::printf("item %d -> position %d (weight %.17g)\n", i,
                    result.position_of_item[i],
                    weights.at(i, result.position_of_item[i] - 1));
      else
        std::printf("item %d -> unplaced\n", i);
    }
    std::printf("total weight: %.17g\n", result.total_weight);
  } catch (const std::exception& e) {
    std::cerr << "match failed: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

int cmd_verify_snapshots(const std::string& snapshots_path, const std::string& out_path) {
  try {
    const auto snaps = urank::read_snapshots_jsonl(snapshots_path);
    const auto report = urank::verify_bounds(snaps);
    const auto j = report.to_json();
    if (out_path.empty()) {
      std::cout << j.dump(2) << '\n';
    } else {
      urank::write_bound_report_json(report, out_path);
      std::printf("checked %d, violations %d, skipped %d non-monotone / %d ties\n",
                  report.n_checked, report.n_violations, report.n_skipped_nonmonotone,
                  report.n_skipped_ties);
    }
    return report.n_violations == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "verify-bounds failed: " << e.what() << '\n';
    return 2;
  }
}

int cmd_compare_arch(const std::string& config_path) {
  const auto cfg = config_from(config_path);
  try {
    const auto rows = urank::compare_ctr_architectures(cfg);
    std::printf("%-6s %10s %10s %14s\n", "arch", "train_auc", "test_auc", "clicks/query");
    for (const auto& r : rows)
      std::printf("%-6s %10.4f %10.4f %14.4f\n", r.architecture.c_str(), r.train_auc,
                  r.test_auc, r.urank_clicks);
  } catch (const std::exception& e) {
    std::cerr << "compare-arch failed: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"u-rank: utility-oriented learning-to-rank laboratory"};
  app.require_subcommand(1);

  std::string config_path, snapshots_path, matrix_path, out_path;
  bool force = false;

  auto add_config = [&](CLI::App* sub, bool with_force = true) {
    sub->add_option("--config", config_path, "experiment config JSON")->required();
    if (with_force)
      sub->add_flag("--force", force, "recompute even if artifacts exist");
  };

  auto* run = app.add_subcommand("run", "run the full pipeline");
  add_config(run);
  auto* simulate = app.add_subcommand("simulate", "generate data, oracle and click logs");
  add_config(simulate);
  auto* train_ctr = app.add_subcommand("train-ctr", "fit the position-aware CTR model");
  add_config(train_ctr);
  auto* train_ranker =
      app.add_subcommand("train-ranker", "fit the utility ranker and trainable baselines");
  add_config(train_ranker);
  auto* evaluate = app.add_subcommand("evaluate", "score all methods on the test split");
  add_config(evaluate);

  auto* verify = app.add_subcommand("verify-bounds", "audit the loss bound chain");
  verify->add_option("--config", config_path, "experiment config JSON");
  verify->add_option("--snapshots", snapshots_path, "snapshot JSONL (bypasses config)");
  verify->add_option("--out", out_path, "report JSON destination");
  verify->add_flag("--force", force, "recompute even if artifacts exist");

  auto* match = app.add_subcommand("match", "solve an assignment from a CSV weight matrix");
  match->add_option("--matrix", matrix_path, "CSV weight matrix, rows = items")->required();

  auto* print_config = app.add_subcommand("print-config", "show defaults or a resolved config");
  print_config->add_option("--config", config_path, "experiment config JSON");

  auto* compare = app.add_subcommand("compare-arch",
                                     "train both CTR architectures and compare them");
  compare->add_option("--config", config_path, "experiment config JSON")->required();

  std::string backend;
  app.add_option("--kernels", backend, "force kernel backend: scalar | avx2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (!backend.empty()) {
      if (backend == "scalar")
        urank::kernels::set_backend(urank::kernels::Backend::scalar);
      else if (backend == "avx2")
        urank::kernels::set_backend(urank::kernels::Backend::avx2);
      else
        throw urank::ConfigError("unknown kernel backend '" + backend + "'");
    }

    if (run->parsed()) return cmd_run(config_path, force);
    if (simulate->parsed()) {
      const auto cfg = config_from(config_path);
      try {
        urank::stage_data(cfg, force);
        urank::stage_simulate(cfg, force);
      } catch (const std::exception& e) {
        std::cerr << "stage simulate failed: " << e.what() << '\n';
        return 2;
      }
      return 0;
    }
    if (train_ctr->parsed())
      return run_stage(config_path, force, urank::stage_train_ctr, "train-ctr");
    if (train_ranker->parsed())
      return run_stage(config_path, force, urank::stage_train_rankers, "train-ranker");
    if (evaluate->parsed())
      return run_stage(config_path, force, urank::stage_evaluate, "evaluate");
    if (verify->parsed()) {
      if (!snapshots_path.empty()) return cmd_verify_snapshots(snapshots_path, out_path);
      if (config_path.empty())
        throw urank::ConfigError("verify-bounds needs --config or --snapshots");
      return run_stage(config_path, force, urank::stage_verify_bounds, "verify-bounds");
    }
    if (match->parsed()) return cmd_match(matrix_path);
    if (print_config->parsed()) {
      urank::ExperimentConfig cfg;
      if (!config_path.empty()) cfg = config_from(config_path);
      nlohmann::json j = cfg.to_json();
      j["config_hash"] = cfg.hash();
      std::cout << j.dump(2) << '\n';
      return 0;
    }
    if (compare->parsed()) return cmd_compare_arch(config_path);
  } catch (const urank::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  return 0;
}
