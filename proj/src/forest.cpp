#include "treeforget/forest.hpp"

#include <fmt/format.h>

#include <cmath>
#include <utility>

#include "treeforget/errors.hpp"

namespace treeforget {

Tree::Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw ModelFormatError("tree has no nodes");
  // Walk the tree in preorder and require each visited node to sit at the
  // next array position; this proves the layout and that every node is
  // reachable exactly once.
  struct Frame {
    std::size_t id;
    std::size_t depth;
  };
  std::vector<Frame> stack{{0, 0}};
  std::size_t expected = 0;
  while (!stack.empty()) {
    const auto [id, depth] = stack.back();
    stack.pop_back();
    if (id != expected) throw ModelFormatError(fmt::format("node {} is not in preorder position", id));
    ++expected;
    depth_ = std::max(depth_, depth);
    const auto& n = nodes_[id];
    if (n.is_leaf()) {
      if (n.right >= 0) throw ModelFormatError(fmt::format("node {} has only one child", id));
      if (n.scores.empty()) throw ModelFormatError(fmt::format("leaf {} has no scores", id));
      for (double s : n.scores) {
        if (!std::isfinite(s)) throw ModelFormatError(fmt::format("leaf {} has a non-finite score", id));
      }
      continue;
    }
    if (n.right < 0) throw ModelFormatError(fmt::format("node {} has only one child", id));
    if (n.feature < 0) throw ModelFormatError(fmt::format("node {} has a negative feature", id));
    if (!std::isfinite(n.threshold)) {
      throw ModelFormatError(fmt::format("node {} has a non-finite threshold", id));
    }
    if (!n.scores.empty()) throw ModelFormatError(fmt::format("decision node {} has scores", id));
    const auto left = static_cast<std::size_t>(n.left);
    const auto right = static_cast<std::size_t>(n.right);
    if (left != id + 1 || right <= left || right >= nodes_.size()) {
      throw ModelFormatError(fmt::format("node {} has out-of-order children", id));
    }
    stack.push_back({right, depth + 1});
    stack.push_back({left, depth + 1});
  }
  if (expected != nodes_.size()) throw ModelFormatError("tree has unreachable nodes");
}

std::size_t Tree::leaf_count() const {
  std::size_t n = 0;
  for (const auto& node : nodes_) n += node.is_leaf() ? 1 : 0;
  return n;
}

Tree Tree::with_thresholds(std::span<const double> thresholds) const {
  if (thresholds.size() != decision_count()) {
    throw ContractError("threshold count does not match decision nodes");
  }
  auto nodes = nodes_;
  std::size_t k = 0;
  for (auto& n : nodes) {
    if (!n.is_leaf()) n.threshold = thresholds[k++];
  }
  return Tree(std::move(nodes));
}

Ensemble::Ensemble(std::vector<Tree> trees, std::vector<double> weights, std::size_t num_classes,
                   std::vector<std::string> feature_names)
    : trees_(std::move(trees)),
      weights_(std::move(weights)),
      num_classes_(num_classes),
      feature_names_(std::move(feature_names)) {
  if (trees_.empty()) throw ModelFormatError("ensemble has no trees");
  if (weights_.size() != trees_.size()) throw ModelFormatError("one weight per tree required");
  if (num_classes_ == 0) throw ModelFormatError("ensemble needs at least one class");
  bool any_positive = false;
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0) throw ModelFormatError("tree weights must be finite and >= 0");
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) throw ModelFormatError("at least one tree weight must be positive");
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    for (const auto& n : trees_[t].nodes()) {
      if (n.is_leaf() && n.scores.size() != num_classes_) {
        throw ModelFormatError(fmt::format("tree {}: leaf score length {} != {} classes", t,
                                           n.scores.size(), num_classes_));
      }
      if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= feature_names_.size()) {
        throw ModelFormatError(fmt::format("tree {}: feature index {} out of range", t, n.feature));
      }
    }
  }
}

std::size_t Ensemble::decision_count() const {
  std::size_t n = 0;
  for (const auto& t : trees_) n += t.decision_count();
  return n;
}

Ensemble Ensemble::with_trees(std::vector<Tree> trees) const {
  return {std::move(trees), weights_, num_classes_, feature_names_};
}

Ensemble Ensemble::with_weights(std::vector<double> weights) const {
  return {trees_, std::move(weights), num_classes_, feature_names_};
}

std::size_t hard_activation(const Tree& tree, std::span<const double> x) {
  std::size_t id = 0;
  while (true) {
    const auto& n = tree.node(id);
    if (n.is_leaf()) return id;
    const auto f = static_cast<std::size_t>(n.feature);
    if (f >= x.size()) throw ContractError("input narrower than the tree's features");
    id = static_cast<std::size_t>(x[f] >= n.threshold ? n.right : n.left);
  }
}

std::span<const double> tree_predict(const Tree& tree, std::span<const double> x) {
  return tree.node(hard_activation(tree, x)).scores;
}

std::vector<double> ensemble_scores(const Ensemble& g, std::span<const double> x) {
  if (x.size() != g.num_features()) {
    throw ContractError(fmt::format("input width {} != model width {}", x.size(), g.num_features()));
  }
  std::vector<double> z(g.num_classes(), 0.0);
  for (std::size_t i = 0; i < g.trees().size(); ++i) {
    const auto s = tree_predict(g.trees()[i], x);
    for (std::size_t y = 0; y < z.size(); ++y) z[y] += g.weights()[i] * s[y];
  }
  return z;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

int ensemble_predict(const Ensemble& g, std::span<const double> x) {
  return static_cast<int>(argmax(ensemble_scores(g, x)));
}

}  // namespace treeforget
