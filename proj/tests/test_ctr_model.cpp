#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "helpers.hpp"
#include "urank/click_sim.hpp"
#include "urank/ctr_model.hpp"
#include "urank/rng.hpp"

using namespace urank;
using urank::testing::make_item;
using urank::testing::make_query;
using urank::testing::TempDir;

namespace {

// Dataset with explicit feature vectors, one query.
Dataset one_query_dataset(std::vector<Item> items, int feature_dim) {
  Dataset d;
  d.feature_dim = feature_dim;
  d.y_max = 4;
  d.queries.push_back(make_query("q0", std::move(items)));
  return d;
}

void zero_params(Mlp& net) {
  for (std::size_t i = 0; i < net.param_count(); ++i) net.set_param(i, 0.0);
}

}  // namespace

TEST_SUITE("ctr_model") {

TEST_CASE("architecture names round trip") {
  CHECK(parse_ctr_architecture("a1") == CtrArchitecture::a1);
  CHECK(parse_ctr_architecture("a2") == CtrArchitecture::a2);
  CHECK(to_string(CtrArchitecture::a1) == "a1");
  CHECK(to_string(CtrArchitecture::a2) == "a2");
  CHECK_THROWS_AS(parse_ctr_architecture("a3"), std::invalid_argument);
}

TEST_CASE("net shapes follow the architecture") {
  const CtrModel m1(CtrArchitecture::a1, 5, 7, {16, 8}, 1);
  CHECK(m1.net().dims() == std::vector<int>{5, 16, 8, 7});
  CHECK(m1.max_position() == 7);
  CHECK(m1.feature_dim() == 5);

  const CtrModel m2(CtrArchitecture::a2, 5, 7, {16, 8}, 1);
  CHECK(m2.net().dims() == std::vector<int>{12, 16, 8, 1});

  CHECK_THROWS_AS(CtrModel(CtrArchitecture::a1, 0, 7, {}, 1), std::invalid_argument);
  CHECK_THROWS_AS(CtrModel(CtrArchitecture::a1, 5, 0, {}, 1), std::invalid_argument);
}

TEST_CASE("a1 predictions are clamped sigmoids of per-position logits") {
  CtrModel m(CtrArchitecture::a1, 2, 3, {}, 1);
  zero_params(m.net());
  m.net().set_param(6, 50.0);   // bias of position-1 logit
  m.net().set_param(7, -50.0);  // position 2
  // position 3 bias stays 0

  const std::vector<double> x{0.3, 0.7};
  CHECK(m.predict(x, 1) == 1.0 - 1e-6);  // clamped, not 1
  CHECK(m.predict(x, 2) == 1e-6);
  CHECK(m.predict(x, 3) == doctest::Approx(0.5));

  const auto all = m.predict_all_positions(x);
  REQUIRE(all.size() == 3);
  for (int k = 1; k <= 3; ++k) CHECK(all[k - 1] == m.predict(x, k));

  CHECK_THROWS_AS(m.predict(x, 0), std::out_of_range);
  CHECK_THROWS_AS(m.predict(x, 4), std::out_of_range);
  CHECK_THROWS_AS(m.predict(std::vector<double>{0.3}, 1), std::invalid_argument);
}

TEST_CASE("a2 one-hot position encoding reaches the right weight") {
  CtrModel m(CtrArchitecture::a2, 1, 2, {}, 1);
  zero_params(m.net());
  m.net().set_param(0, 0.5);   // feature weight
  m.net().set_param(1, 1.0);   // onehot for position 1
  m.net().set_param(2, -1.0);  // onehot for position 2
  m.net().set_param(3, 0.25);  // bias

  const std::vector<double> x{2.0};
  // z = 0.5*2 + 1 + 0.25 and 0.5*2 - 1 + 0.25
  CHECK(m.predict(x, 1) == doctest::Approx(0.9046505351008906));
  CHECK(m.predict(x, 2) == doctest::Approx(0.5621765008857981));

  const Item it = make_item(0, {2.0}, 1);
  CHECK(m.click_prob(it, 2) == m.predict(x, 2));
}

TEST_CASE("collect_ctr_samples flattens sessions into position triples") {
  const Dataset data = one_query_dataset(
      {make_item(0, {0.1}, 1), make_item(1, {0.2}, 2), make_item(2, {0.3}, 0)}, 1);
  std::vector<ClickSession> sessions(2);
  sessions[0] = {"q0", {2, 0}, {1, 0}};
  sessions[1] = {"q0", {1, 2}, {0, 1}};

  const auto samples = collect_ctr_samples(sessions, data);
  REQUIRE(samples.size() == 4);
  CHECK(samples[0].item_id == 2);
  CHECK(samples[0].position == 1);
  CHECK(samples[0].click == 1);
  CHECK(samples[1].item_id == 0);
  CHECK(samples[1].position == 2);
  CHECK(samples[1].click == 0);
  CHECK(samples[3].item_id == 2);
  CHECK(samples[3].position == 2);
  CHECK(samples[3].click == 1);

  sessions[0].query_id = "zz";
  CHECK_THROWS_AS(collect_ctr_samples(sessions, data), std::runtime_error);
}

TEST_CASE("ctr_loss at zero parameters is ln 2 regardless of clicks") {
  const Dataset data = one_query_dataset({make_item(0, {0.4}, 1), make_item(1, {0.6}, 2)}, 1);
  CtrModel m(CtrArchitecture::a1, 1, 2, {}, 1);
  zero_params(m.net());
  const std::vector<CtrSample> samples{{0, 0, 1, 1}, {0, 1, 2, 0}};
  CHECK(ctr_loss(m, samples, data, nullptr) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(ctr_loss(m, {}, data, nullptr), std::invalid_argument);
}

TEST_CASE("ctr_loss analytic gradient matches finite differences") {
  Rng rng(31);
  const Dataset data = one_query_dataset(
      {make_item(0, {rng.uniform(), rng.uniform()}, 1),
       make_item(1, {rng.uniform(), rng.uniform()}, 2),
       make_item(2, {rng.uniform(), rng.uniform()}, 0)},
      2);
  const std::vector<CtrSample> samples{
      {0, 0, 1, 1}, {0, 1, 2, 0}, {0, 2, 3, 1}, {0, 1, 1, 0}, {0, 0, 3, 0}};

  for (auto arch : {CtrArchitecture::a1, CtrArchitecture::a2}) {
    CtrModel m(arch, 2, 3, {4}, 7);
    MlpGrad g = m.net().zero_grad();
    ctr_loss(m, samples, data, &g);

    const double h = 1e-6;
    std::size_t flat = 0;
    for (const auto& layer : g.layers) {
      const auto check_one = [&](double analytic) {
        const double saved = m.net().get_param(flat);
        m.net().set_param(flat, saved + h);
        const double up = ctr_loss(m, samples, data, nullptr);
        m.net().set_param(flat, saved - h);
        const double down = ctr_loss(m, samples, data, nullptr);
        m.net().set_param(flat, saved);
        const double fd = (up - down) / (2.0 * h);
        CHECK(analytic == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
        ++flat;
      };
      for (double v : layer.w) check_one(v);
      for (double v : layer.b) check_one(v);
    }
  }
}

TEST_CASE("rank_auc matches hand counts and handles ties") {
  CHECK(rank_auc({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}) == doctest::Approx(0.75));
  CHECK(rank_auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  CHECK(rank_auc({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}) == doctest::Approx(0.0));
  CHECK(rank_auc({0.5, 0.5}, {1, 0}) == doctest::Approx(0.5));
  CHECK(rank_auc({0.3, 0.3, 0.9}, {0, 1, 1}) == doctest::Approx(0.75));

  CHECK_THROWS_AS(rank_auc({0.5, 0.6}, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(rank_auc({0.5, 0.6}, {0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(rank_auc({0.5}, {0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(rank_auc({0.5, 0.6}, {0, 2}), std::invalid_argument);
}

TEST_CASE("train_ctr learns a deterministic position-aware model") {
  const Dataset data = generate_synthetic(10, 5, 3, 4, 2);
  const auto oracle = OracleClickModel::sample(3, 1.0, 0.1, 4, 4, 3);
  const LoggingPolicy policy{PolicyKind::relevance_sorted, nullptr};
  const auto sessions = simulate_sessions(data, oracle, policy, 30, 4);

  CtrTrainConfig cfg;
  cfg.hidden_sizes = {8};
  cfg.learning_rate = 0.1;
  cfg.epochs = 5;
  cfg.batch_size = 32;
  cfg.validation_fraction = 0.2;
  cfg.seed = 5;

  CtrTrainReport report;
  const CtrModel model = train_ctr(sessions, data, CtrArchitecture::a1, cfg, &report);

  CHECK(model.max_position() == 4);  // deepest logged position, min(5 docs, oracle k_max)
  REQUIRE(report.epochs.size() == 5);
  CHECK(report.epochs.back().train_loss < report.epochs.front().train_loss);
  for (const auto& e : report.epochs) CHECK(std::isfinite(e.train_loss));

  const double a = auc(model, sessions, data);
  CHECK(a > 0.5);
  CHECK(a <= 1.0);
  CHECK(report.train_auc > 0.5);

  // Same seed, same model.
  const CtrModel again = train_ctr(sessions, data, CtrArchitecture::a1, cfg, nullptr);
  const std::vector<double> probe{0.25, 0.5, 0.75};
  CHECK(again.predict_all_positions(probe) == model.predict_all_positions(probe));

  // No validation split -> AUC reported as NaN.
  CtrTrainConfig noval = cfg;
  noval.validation_fraction = 0.0;
  CtrTrainReport r2;
  train_ctr(sessions, data, CtrArchitecture::a2, noval, &r2);
  CHECK(std::isnan(r2.val_auc));

  CHECK_THROWS_AS(train_ctr({}, data, CtrArchitecture::a1, cfg, nullptr),
                  std::invalid_argument);
}

TEST_CASE("model json and file round trips preserve predictions") {
  TempDir dir("ctr_io");
  const CtrModel m(CtrArchitecture::a2, 3, 4, {6}, 9);
  const auto path = dir.path() / "ctr.json";
  save_ctr_model(m, path);
  const CtrModel back = load_ctr_model(path);

  CHECK(back.architecture() == CtrArchitecture::a2);
  CHECK(back.feature_dim() == 3);
  CHECK(back.max_position() == 4);
  const std::vector<double> x{0.2, -0.1, 0.7};
  CHECK(back.predict_all_positions(x) == m.predict_all_positions(x));

  auto j = m.to_json();
  j["k_max"] = 9;  // net no longer matches the claimed shape
  CHECK_THROWS_AS(CtrModel::from_json(j), std::invalid_argument);
  j["kind"] = "other";
  CHECK_THROWS_AS(CtrModel::from_json(j), std::invalid_argument);
}

}  // TEST_SUITE
