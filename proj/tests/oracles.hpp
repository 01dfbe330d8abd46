#pragma once

// Slow, direct reimplementations used to check the library. None of them
// shares code with the code under test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <set>
#include <span>
#include <vector>

#include "treeforget/dataset.hpp"
#include "treeforget/forest.hpp"

namespace tf_test::oracle {

using treeforget::TabularDataset;
using treeforget::TreeNode;

// (concordant + ties / 2) / (pos * neg) over all pairs.
inline double pairwise_auc(std::span<const double> scores, std::span<const int> labels) {
  std::size_t twice = 0;
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 1) ++pos; else ++neg;
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) twice += 2;
      else if (scores[i] == scores[j]) twice += 1;
    }
  }
  return static_cast<double>(twice) / 2.0 / (static_cast<double>(pos) * static_cast<double>(neg));
}

// Central differences of f at theta, one coordinate at a time.
inline std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                             std::vector<double> theta, double h = 1e-5) {
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + h;
    const double up = f(theta);
    theta[i] = saved - h;
    const double down = f(theta);
    theta[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// max_i |a_i - b_i| / max(max_i |b_i|, floor).
inline double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-12) {
  double diff = 0.0;
  double scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / scale;
}

struct Candidate {
  int feature = -1;
  double threshold = 0.0;
  double impurity = std::numeric_limits<double>::infinity();
};

// Weighted child Gini impurity W_L * G_L + W_R * G_R, computed from scratch.
inline double child_impurity(const TabularDataset& data, const std::vector<std::size_t>& rows, int feature,
                             double threshold) {
  const std::size_t k = data.num_classes();
  std::vector<double> left(k, 0.0);
  std::vector<double> right(k, 0.0);
  for (auto r : rows) {
    auto& side = data.at(r, static_cast<std::size_t>(feature)) >= threshold ? right : left;
    side[static_cast<std::size_t>(data.label(r))] += 1.0;
  }
  const auto gini_mass = [](const std::vector<double>& counts) {
    double n = 0.0;
    for (double c : counts) n += c;
    if (n == 0.0) return 0.0;
    double g = 1.0;
    for (double c : counts) g -= (c / n) * (c / n);
    return n * g;
  };
  return gini_mass(left) + gini_mass(right);
}

// Every midpoint split, lowest (feature, threshold) among the minimisers.
inline Candidate best_split(const TabularDataset& data, const std::vector<std::size_t>& rows) {
  std::vector<Candidate> all;
  for (std::size_t f = 0; f < data.cols(); ++f) {
    std::set<double> values;
    for (auto r : rows) values.insert(data.at(r, f));
    for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
      const double mid = (*it + *std::next(it)) / 2.0;
      all.push_back({static_cast<int>(f), mid, child_impurity(data, rows, static_cast<int>(f), mid)});
    }
  }
  Candidate best;
  for (const auto& c : all) best.impurity = std::min(best.impurity, c.impurity);
  for (const auto& c : all) {
    if (c.impurity <= best.impurity + 1e-9) return c;
  }
  return best;
}

// Greedy CART rebuilt recursively on unit weights. Returns preorder nodes.
inline void grow_cart(const TabularDataset& data, const std::vector<std::size_t>& rows, int depth,
                      int max_depth, std::vector<TreeNode>& out) {
  const std::size_t k = data.num_classes();
  std::vector<double> counts(k, 0.0);
  for (auto r : rows) counts[static_cast<std::size_t>(data.label(r))] += 1.0;
  const auto present = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; });
  const std::size_t id = out.size();
  out.emplace_back();
  Candidate c;
  if (depth < max_depth && present > 1 && rows.size() >= 2) c = best_split(data, rows);
  if (c.feature < 0) {
    for (auto& v : counts) v /= static_cast<double>(rows.size());
    out[id].scores = counts;
    return;
  }
  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
  for (auto r : rows) (data.at(r, static_cast<std::size_t>(c.feature)) >= c.threshold ? right : left).push_back(r);
  out[id].feature = c.feature;
  out[id].threshold = c.threshold;
  out[id].left = static_cast<std::int32_t>(out.size());
  grow_cart(data, left, depth + 1, max_depth, out);
  out[id].right = static_cast<std::int32_t>(out.size());
  grow_cart(data, right, depth + 1, max_depth, out);
}

inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) if (v > 0.0) h -= v * std::log(v);
  return h;
}

}  // namespace tf_test::oracle
