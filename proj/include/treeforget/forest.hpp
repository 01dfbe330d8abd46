#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "treeforget/dataset.hpp"

namespace treeforget {

// One node of a binary decision tree. A node is a leaf iff it has no
// children; decision nodes send x right when x[feature] >= threshold.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::vector<double> scores;  // leaves only, length num_classes

  bool is_leaf() const { return left < 0; }
  bool operator==(const TreeNode&) const = default;
};

// Nodes are stored in preorder: the root is node 0, a decision node's left
// child immediately follows it, and node ids are array positions.
class Tree {
 public:
  Tree() = default;
  explicit Tree(std::vector<TreeNode> nodes);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t depth() const { return depth_; }
  std::size_t leaf_count() const;
  std::size_t decision_count() const { return size() - leaf_count(); }

  // Copy with decision-node thresholds replaced, in preorder of decision nodes.
  Tree with_thresholds(std::span<const double> thresholds) const;

  bool operator==(const Tree& other) const { return nodes_ == other.nodes_; }

 private:
  std::vector<TreeNode> nodes_;
  std::size_t depth_ = 0;
};

// Weighted-vote tree ensemble: scores(x) = sum_i weights[i] * tree_i(x),
// prediction = argmax of scores.
class Ensemble {
 public:
  Ensemble() = default;
  Ensemble(std::vector<Tree> trees, std::vector<double> weights, std::size_t num_classes,
           std::vector<std::string> feature_names);

  const std::vector<Tree>& trees() const { return trees_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t num_features() const { return feature_names_.size(); }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  std::size_t decision_count() const;

  Ensemble with_trees(std::vector<Tree> trees) const;
  Ensemble with_weights(std::vector<double> weights) const;

  bool operator==(const Ensemble&) const = default;

 private:
  std::vector<Tree> trees_;
  std::vector<double> weights_;
  std::size_t num_classes_ = 0;
  std::vector<std::string> feature_names_;
};

// Leaf reached by x.
std::size_t hard_activation(const Tree& tree, std::span<const double> x);
std::span<const double> tree_predict(const Tree& tree, std::span<const double> x);
std::vector<double> ensemble_scores(const Ensemble& g, std::span<const double> x);
int ensemble_predict(const Ensemble& g, std::span<const double> x);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

enum class TrainMethod { random_forest, adaboost_samme, single_cart };

TrainMethod parse_train_method(std::string_view name);
std::string_view to_string(TrainMethod method);

struct TrainConfig {
  TrainMethod method = TrainMethod::random_forest;
  int num_trees = 50;
  int max_depth = 8;
  int min_leaf = 1;
  double bag_fraction = 1.0;
  std::uint64_t seed = 42;
  // Features examined per split. 0 means sqrt(width) for random forests and
  // every feature otherwise.
  int max_features = 0;
  // Replace leaf class distributions with the one-hot of their argmax.
  bool one_hot_leaves = false;
  int threads = 1;

  void validate() const;
};

// Greedy Gini CART on all rows of `data`.
Tree train_cart(const TabularDataset& data, const TrainConfig& cfg);
// CART on the listed positions (repeats allowed) with per-row weights indexed
// by dataset position.
Tree train_cart(const TabularDataset& data, const TrainConfig& cfg,
                std::span<const std::size_t> positions, std::span<const double> row_weights,
                std::uint64_t feature_seed);

Ensemble train_random_forest(const TabularDataset& data, const TrainConfig& cfg);
Ensemble train_boosted(const TabularDataset& data, const TrainConfig& cfg);
// Dispatches on cfg.method; single_cart yields a one-tree ensemble.
Ensemble train(const TabularDataset& data, const TrainConfig& cfg);

// SAMME tree weight ln((1-eps)/eps) + ln(K-1), eps clamped to [1e-10, 1).
double samme_tree_weight(double weighted_error, std::size_t num_classes);

// Model file: a JSON document
//   {"version": 1, "num_classes": K, "feature_names": [...],
//    "trees": [{"weight": w, "nodes": [{"id", "kind": "split"|"leaf",
//               "feature", "threshold", "left", "right"} | {"id", "kind", "scores"}]}]}
// with node ids in preorder. Doubles are written in shortest round-trip form.
std::string model_to_json(const Ensemble& g);
Ensemble model_from_json(std::string_view text);
void save_model(const Ensemble& g, const std::filesystem::path& path);
Ensemble load_model(const std::filesystem::path& path);

}  // namespace treeforget
