#pragma once

// Shared test fixtures: hand-built items/queries and a click model whose
// probabilities are scripted in a table, so expected values can be worked
// out on paper.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "urank/click_model.hpp"
#include "urank/letor.hpp"

namespace urank::testing {

inline Item make_item(int id, std::vector<double> features, int grade,
                      double bid = 1.0) {
  Item it;
  it.item_id = id;
  it.features = std::move(features);
  it.relevance = grade;
  it.utility_value = bid;
  return it;
}

inline QueryGroup make_query(std::string id, std::vector<Item> items) {
  QueryGroup q;
  q.query_id = std::move(id);
  q.items = std::move(items);
  return q;
}

// Click probabilities read straight from a table: rows follow item_id,
// columns are positions 1..k_max.
class FakeClickModel final : public ClickModel {
 public:
  explicit FakeClickModel(std::vector<std::vector<double>> probs)
      : probs_(std::move(probs)) {}

  double click_prob(const Item& item, int position) const override {
    return probs_.at(static_cast<std::size_t>(item.item_id)).at(
        static_cast<std::size_t>(position - 1));
  }
  int max_position() const override { return static_cast<int>(probs_.front().size()); }

 private:
  std::vector<std::vector<double>> probs_;
};

// Unique scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("urank_test_" + tag + "_" + std::to_string(counter_++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

}  // namespace urank::testing
