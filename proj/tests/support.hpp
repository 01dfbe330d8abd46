#pragma once

// Small fixtures shared by the unit and acceptance tests.

#include <cstddef>
#include <string>
#include <vector>

#include "treeforget/dataset.hpp"
#include "treeforget/forest.hpp"
#include "treeforget/rng.hpp"

namespace tf_test {

using namespace treeforget;

inline TabularDataset make_data(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                                std::size_t num_classes = 2) {
  const std::size_t cols = x.empty() ? 0 : x.front().size();
  std::vector<std::string> names;
  for (std::size_t j = 0; j < cols; ++j) names.push_back("f" + std::to_string(j));
  std::vector<std::string> classes;
  for (std::size_t c = 0; c < num_classes; ++c) classes.push_back(std::to_string(c));
  std::vector<double> flat;
  for (const auto& row : x) flat.insert(flat.end(), row.begin(), row.end());
  std::vector<RowId> ids(y.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<RowId>(i);
  return {names, std::vector<FeatureKind>(cols, FeatureKind::numeric), classes, flat, y, ids};
}

inline TreeNode leaf(std::vector<double> scores) {
  TreeNode n;
  n.scores = std::move(scores);
  return n;
}

inline TreeNode split(int feature, double threshold, int left, int right) {
  TreeNode n;
  n.feature = feature;
  n.threshold = threshold;
  n.left = left;
  n.right = right;
  return n;
}

inline Tree stump(int feature, double threshold, std::vector<double> left, std::vector<double> right) {
  return Tree({split(feature, threshold, 1, 2), leaf(std::move(left)), leaf(std::move(right))});
}

inline Ensemble single(Tree tree, std::size_t num_classes, std::size_t num_features) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < num_features; ++j) names.push_back("f" + std::to_string(j));
  return {{std::move(tree)}, {1.0}, num_classes, names};
}

inline std::vector<double> random_distribution(Rng& rng, std::size_t k) {
  std::vector<double> p(k);
  double sum = 0.0;
  for (auto& v : p) {
    v = 0.05 + rng.uniform();
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

struct RandomTreeSpec {
  std::size_t max_depth = 3;
  std::size_t num_features = 3;
  std::size_t num_classes = 2;
  // Thresholds are uniform in [lo, hi), or integers in [lo, hi) when set.
  double lo = 0.0;
  double hi = 1.0;
  bool integer_thresholds = false;
  double split_probability = 0.8;
};

namespace detail {
inline int grow_random(Rng& rng, const RandomTreeSpec& spec, std::size_t depth,
                       std::vector<TreeNode>& nodes) {
  const int id = static_cast<int>(nodes.size());
  const bool is_split = depth < spec.max_depth && (depth == 0 || rng.uniform() < spec.split_probability);
  if (!is_split) {
    nodes.push_back(leaf(random_distribution(rng, spec.num_classes)));
    return id;
  }
  const int f = static_cast<int>(rng.uniform_index(spec.num_features));
  double theta = spec.lo + (spec.hi - spec.lo) * rng.uniform();
  if (spec.integer_thresholds) {
    theta = spec.lo + static_cast<double>(rng.uniform_index(static_cast<std::uint64_t>(spec.hi - spec.lo)));
  }
  nodes.push_back(split(f, theta, -1, -1));
  const int l = grow_random(rng, spec, depth + 1, nodes);
  const int r = grow_random(rng, spec, depth + 1, nodes);
  nodes[static_cast<std::size_t>(id)].left = l;
  nodes[static_cast<std::size_t>(id)].right = r;
  return id;
}
}  // namespace detail

inline Tree random_tree(Rng& rng, const RandomTreeSpec& spec) {
  std::vector<TreeNode> nodes;
  detail::grow_random(rng, spec, 0, nodes);
  return Tree(std::move(nodes));
}

inline Ensemble random_ensemble(Rng& rng, std::size_t num_trees, const RandomTreeSpec& spec) {
  std::vector<Tree> trees;
  std::vector<double> weights;
  for (std::size_t t = 0; t < num_trees; ++t) {
    trees.push_back(random_tree(rng, spec));
    weights.push_back(0.2 + rng.uniform());
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < spec.num_features; ++j) names.push_back("f" + std::to_string(j));
  return {std::move(trees), std::move(weights), spec.num_classes, names};
}

inline TabularDataset random_dataset(Rng& rng, std::size_t rows, std::size_t cols, std::size_t num_classes,
                                  double lo = 0.0, double hi = 1.0) {
  std::vector<std::vector<double>> x(rows, std::vector<double>(cols));
  std::vector<int> y(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (auto& v : x[i]) v = lo + (hi - lo) * rng.uniform();
    y[i] = static_cast<int>(rng.uniform_index(num_classes));
  }
  return make_data(x, y, num_classes);
}

}  // namespace tf_test
