#include "urank/letor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "urank/rng.hpp"

namespace urank {

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

// Full-precision double formatting so written files re-parse bit-equal.
std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

int Dataset::total_items() const {
  int n = 0;
  for (const auto& q : queries) n += q.size();
  return n;
}

const QueryGroup& Dataset::query(const std::string& id) const {
  for (const auto& q : queries) {
    if (q.query_id == id) return q;
  }
  throw std::runtime_error("no such query in dataset: " + id);
}

Dataset parse_letor(const std::string& path, int feature_dim, int y_max) {
  if (feature_dim <= 0) throw std::invalid_argument("feature_dim must be positive");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open LETOR file: " + path);

  Dataset ds;
  ds.feature_dim = feature_dim;
  ds.y_max = y_max;

  std::map<std::string, int> qid_index;  // qid -> position in ds.queries
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    double utility = 1.0;
    // Strip comment; "# b=<v>" carries the utility value.
    if (auto hash = line.find('#'); hash != std::string::npos) {
      std::string comment = line.substr(hash + 1);
      line.resize(hash);
      std::istringstream cs(comment);
      std::string tok;
      while (cs >> tok) {
        if (tok.rfind("b=", 0) == 0) {
          try {
            utility = std::stod(tok.substr(2));
          } catch (const std::exception&) {
            parse_fail(path, line_no, "bad utility value in comment: " + tok);
          }
        }
      }
    }

    std::istringstream ls(line);
    std::string label_tok;
    if (!(ls >> label_tok)) continue;  // blank line

    int label = 0;
    try {
      std::size_t pos = 0;
      label = std::stoi(label_tok, &pos);
      if (pos != label_tok.size()) throw std::invalid_argument(label_tok);
    } catch (const std::exception&) {
      parse_fail(path, line_no, "bad relevance label: " + label_tok);
    }
    if (label < 0) parse_fail(path, line_no, "negative relevance label");
    if (label > y_max) {
      parse_fail(path, line_no, "relevance label " + std::to_string(label) +
                                    " exceeds y_max " + std::to_string(y_max));
    }

    std::string qid_tok;
    if (!(ls >> qid_tok) || qid_tok.rfind("qid:", 0) != 0 || qid_tok.size() <= 4) {
      parse_fail(path, line_no, "expected qid:<id> after label");
    }
    const std::string qid = qid_tok.substr(4);

    Item item;
    item.features.assign(static_cast<std::size_t>(feature_dim), 0.0);
    item.relevance = label;
    item.utility_value = utility;

    std::string feat_tok;
    while (ls >> feat_tok) {
      const auto colon = feat_tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == feat_tok.size()) {
        parse_fail(path, line_no, "bad feature token: " + feat_tok);
      }
      int fid = 0;
      double val = 0.0;
      try {
        fid = std::stoi(feat_tok.substr(0, colon));
        val = std::stod(feat_tok.substr(colon + 1));
      } catch (const std::exception&) {
        parse_fail(path, line_no, "bad feature token: " + feat_tok);
      }
      if (fid < 1 || fid > feature_dim) {
        parse_fail(path, line_no, "feature id " + std::to_string(fid) +
                                      " outside 1.." + std::to_string(feature_dim));
      }
      item.features[static_cast<std::size_t>(fid - 1)] = val;
    }

    auto [it, inserted] = qid_index.try_emplace(qid, static_cast<int>(ds.queries.size()));
    if (inserted) ds.queries.push_back(QueryGroup{qid, {}});
    QueryGroup& group = ds.queries[static_cast<std::size_t>(it->second)];
    item.item_id = group.size();
    group.items.push_back(std::move(item));
  }
  return ds;
}

void write_letor(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write LETOR file: " + path);
  for (const auto& q : dataset.queries) {
    for (const auto& item : q.items) {
      out << item.relevance << " qid:" << q.query_id;
      for (int j = 0; j < dataset.feature_dim; ++j) {
        out << ' ' << (j + 1) << ':' << format_double(item.features[static_cast<std::size_t>(j)]);
      }
      out << " # b=" << format_double(item.utility_value) << '\n';
    }
  }
}

Dataset generate_synthetic(int n_queries, int n_docs, int feature_dim, int y_max,
                           std::uint64_t seed, const BidSpec& bids) {
  if (n_queries <= 0 || n_docs <= 0 || feature_dim <= 0 || y_max <= 0) {
    throw std::invalid_argument("synthetic dataset parameters must be positive");
  }

  Dataset ds;
  ds.feature_dim = feature_dim;
  ds.y_max = y_max;

  // Hidden relevance scorer shared by the whole dataset.
  Rng scorer_rng(mix_seed(seed, fnv1a("relevance-scorer")));
  std::vector<double> v(static_cast<std::size_t>(feature_dim));
  for (auto& w : v) w = scorer_rng.uniform(-1.0, 1.0);

  constexpr double kGradeNoise = 0.1;

  for (int qi = 0; qi < n_queries; ++qi) {
    QueryGroup q;
    q.query_id = "q" + std::to_string(qi);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(qi)));
    for (int di = 0; di < n_docs; ++di) {
      Item item;
      item.item_id = di;
      item.features.resize(static_cast<std::size_t>(feature_dim));
      double raw = 0.0;
      for (int j = 0; j < feature_dim; ++j) {
        const double f = rng.uniform();
        item.features[static_cast<std::size_t>(j)] = f;
        raw += v[static_cast<std::size_t>(j)] * (f - 0.5);
      }
      const double t = 1.0 / (1.0 + std::exp(-2.0 * raw));
      int grade = std::min(y_max, static_cast<int>(t * (y_max + 1)));
      if (rng.bernoulli(kGradeNoise)) grade = rng.uniform_int(0, y_max);
      item.relevance = grade;
      item.utility_value = bids.kind == BidKind::constant
                               ? bids.value
                               : rng.uniform(bids.low, bids.high);
      q.items.push_back(std::move(item));
    }
    ds.queries.push_back(std::move(q));
  }
  return ds;
}

void check_permutation(const std::vector<int>& order, int n) {
  if (static_cast<int>(order.size()) != n) {
    throw std::invalid_argument("permutation length " + std::to_string(order.size()) +
                                " does not match item count " + std::to_string(n));
  }
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (int idx : order) {
    if (idx < 0 || idx >= n || seen[static_cast<std::size_t>(idx)]) {
      throw std::invalid_argument("invalid permutation of 0.." + std::to_string(n - 1));
    }
    seen[static_cast<std::size_t>(idx)] = true;
  }
}

QueryGroup truncate_to_top_k(const QueryGroup& query, int k_max,
                             const std::vector<int>& order) {
  if (k_max <= 0) throw std::invalid_argument("k_max must be positive");
  check_permutation(order, query.size());
  QueryGroup out;
  out.query_id = query.query_id;
  const int m = std::min(query.size(), k_max);
  out.items.reserve(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) {
    Item item = query.items[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])];
    item.item_id = r;
    out.items.push_back(std::move(item));
  }
  return out;
}

}  // namespace urank
