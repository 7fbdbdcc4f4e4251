#include "urank/matching.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace urank {

WeightMatrix WeightMatrix::zeros(int n_items, int n_positions) {
  if (n_items < 1 || n_positions < 1)
    throw std::invalid_argument("weight matrix: dimensions must be positive");
  WeightMatrix m;
  m.n_items = n_items;
  m.n_positions = n_positions;
  m.w.assign(static_cast<std::size_t>(n_items) * n_positions, 0.0);
  return m;
}

WeightMatrix WeightMatrix::from_click_model(const ClickModel& model,
                                            const QueryGroup& query, int k_max) {
  const int n = static_cast<int>(query.items.size());
  if (n == 0) throw std::invalid_argument("weight matrix: empty query");
  const int positions = std::min({n, k_max, model.max_position()});
  WeightMatrix m = zeros(n, positions);
  for (int i = 0; i < n; ++i) {
    const Item& item = query.items[i];
    for (int k = 1; k <= positions; ++k)
      m.at(i, k - 1) = model.click_prob(item, k) * item.utility_value;
  }
  return m;
}

WeightMatrix read_weight_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty())
    throw std::runtime_error(path.string() + ": empty matrix");
  WeightMatrix m = WeightMatrix::zeros(static_cast<int>(rows.size()),
                                       static_cast<int>(rows.front().size()));
  for (int i = 0; i < m.n_items; ++i)
    for (int j = 0; j < m.n_positions; ++j) m.at(i, j) = rows[i][j];
  return m;
}

void write_weight_csv(const WeightMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[64];
  for (int i = 0; i < m.n_items; ++i) {
    for (int j = 0; j < m.n_positions; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m.at(i, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
}

std::vector<int> MatchingResult::as_ranking() const {
  const int n = static_cast<int>(position_of_item.size());
  std::vector<int> order;
  order.reserve(n);
  std::vector<std::pair<int, int>> placed;  // (position, item)
  for (int i = 0; i < n; ++i)
    if (position_of_item[i] > 0) placed.emplace_back(position_of_item[i], i);
  std::sort(placed.begin(), placed.end());
  for (const auto& [pos, item] : placed) order.push_back(item);
  for (int i = 0; i < n; ++i)
    if (position_of_item[i] == 0) order.push_back(i);
  return order;
}

MatchingResult km_match(const WeightMatrix& m) {
  const int rows = m.n_positions;  // every position must be filled
  const int cols = m.n_items;
  if (rows > cols)
    throw std::invalid_argument("km_match: more positions than items");
  for (double v : m.w)
    if (!std::isfinite(v)) throw std::invalid_argument("km_match: non-finite weight");
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Assignment problem with potentials, minimising -weight. 1-indexed;
  // p[j] is the row assigned to column j (0 = free).
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<int> p(cols + 1, 0), way(cols + 1, 0);
  auto cost = [&](int i, int j) { return -m.at(j - 1, i - 1); };

  for (int i = 1; i <= rows; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(cols + 1, kInf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  MatchingResult res;
  res.position_of_item.assign(cols, 0);
  for (int j = 1; j <= cols; ++j) {
    if (p[j] == 0) continue;
    res.position_of_item[j - 1] = p[j];
    res.total_weight += m.at(j - 1, p[j] - 1);
  }
  return res;
}

namespace {

void brute_force_rec(const WeightMatrix& m, int pos, std::vector<char>& taken,
                     std::vector<int>& cur, double acc, double& best,
                     std::vector<int>& best_assign) {
  if (pos == m.n_positions) {
    if (acc > best) {
      best = acc;
      best_assign = cur;
    }
    return;
  }
  for (int i = 0; i < m.n_items; ++i) {
    if (taken[i]) continue;
    taken[i] = 1;
    cur[pos] = i;
    brute_force_rec(m, pos + 1, taken, cur, acc + m.at(i, pos), best, best_assign);
    taken[i] = 0;
  }
}

}  // namespace

MatchingResult brute_force_match(const WeightMatrix& m) {
  if (m.n_items > 10)
    throw std::invalid_argument("brute_force_match: too many items");
  if (m.n_positions > m.n_items)
    throw std::invalid_argument("brute_force_match: more positions than items");
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> assign(m.n_positions, -1), cur(m.n_positions, -1);
  std::vector<char> taken(m.n_items, 0);
  brute_force_rec(m, 0, taken, cur, 0.0, best, assign);

  MatchingResult res;
  res.position_of_item.assign(m.n_items, 0);
  res.total_weight = best;
  for (int pos = 0; pos < m.n_positions; ++pos)
    res.position_of_item[assign[pos]] = pos + 1;
  return res;
}

double utility_of_ranking(const WeightMatrix& m, const std::vector<int>& order) {
  check_permutation(order, m.n_items);
  double total = 0.0;
  for (int r = 0; r < m.n_positions; ++r) total += m.at(order[r], r);
  return total;
}

}  // namespace urank
