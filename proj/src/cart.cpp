#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "treeforget/errors.hpp"
#include "treeforget/forest.hpp"
#include "treeforget/parallel.hpp"
#include "treeforget/rng.hpp"

namespace treeforget {

namespace {

// Greedy top-down Gini tree builder. Nodes are appended in preorder.
class CartBuilder {
 public:
  CartBuilder(const TabularDataset& data, const TrainConfig& cfg, std::span<const double> weights,
              std::size_t features_per_split, std::uint64_t feature_seed)
      : data_(data),
        cfg_(cfg),
        weights_(weights),
        k_(data.num_classes()),
        mtry_(features_per_split),
        rng_(feature_seed) {}

  Tree build(std::vector<std::size_t> positions) {
    grow(std::move(positions), 0);
    return Tree(std::move(nodes_));
  }

 private:
  struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double score = -std::numeric_limits<double>::infinity();
    bool found = false;
  };

  std::int32_t grow(std::vector<std::size_t> positions, int depth) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();

    std::vector<double> totals(k_, 0.0);
    for (auto p : positions) totals[static_cast<std::size_t>(data_.label(p))] += weights_[p];
    const double total = std::accumulate(totals.begin(), totals.end(), 0.0);
    const auto classes_present =
        std::count_if(totals.begin(), totals.end(), [](double w) { return w > 0.0; });

    const bool stop = depth >= cfg_.max_depth || classes_present <= 1 ||
                      positions.size() < 2 * static_cast<std::size_t>(cfg_.min_leaf);
    const Split split = stop ? Split{} : best_split(positions, totals, total);
    if (!split.found) {
      nodes_[static_cast<std::size_t>(id)].scores = leaf_scores(totals, total);
      return id;
    }

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto p : positions) {
      (data_.at(p, split.feature) >= split.threshold ? right : left).push_back(p);
    }
    positions.clear();
    positions.shrink_to_fit();
    const auto l = grow(std::move(left), depth + 1);
    const auto r = grow(std::move(right), depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = static_cast<std::int32_t>(split.feature);
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> features(data_.cols());
    std::iota(features.begin(), features.end(), std::size_t{0});
    if (mtry_ >= features.size()) return features;
    for (std::size_t i = 0; i < mtry_; ++i) {
      const auto j = i + static_cast<std::size_t>(rng_.uniform_index(features.size() - i));
      std::swap(features[i], features[j]);
    }
    features.resize(mtry_);
    std::sort(features.begin(), features.end());
    return features;
  }

  // Maximises sum_c L_c^2/W_L + sum_c R_c^2/W_R, which is equivalent to
  // minimising the weighted Gini impurity of the children. Features are
  // visited in increasing index and thresholds in increasing value, and only
  // a strictly better score replaces the incumbent, so ties keep the lowest
  // feature and then the lowest threshold.
  Split best_split(const std::vector<std::size_t>& positions, const std::vector<double>& totals,
                   double total) {
    Split best;
    const double tolerance = 1e-12 * std::max(1.0, total);
    const std::size_t n = positions.size();
    const auto min_leaf = static_cast<std::size_t>(cfg_.min_leaf);
    std::vector<std::pair<double, std::size_t>> column(n);
    std::vector<double> left(k_);
    for (const auto f : candidate_features()) {
      for (std::size_t i = 0; i < n; ++i) column[i] = {data_.at(positions[i], f), positions[i]};
      std::sort(column.begin(), column.end());
      std::fill(left.begin(), left.end(), 0.0);
      double left_total = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto p = column[i].second;
        const double w = weights_[p];
        left[static_cast<std::size_t>(data_.label(p))] += w;
        left_total += w;
        const double lo = column[i].first;
        const double hi = column[i + 1].first;
        if (lo == hi || i + 1 < min_leaf || n - i - 1 < min_leaf) continue;
        const double right_total = total - left_total;
        double score = 0.0;
        for (std::size_t c = 0; c < k_; ++c) {
          const double r = totals[c] - left[c];
          if (left_total > 0.0) score += left[c] * left[c] / left_total;
          if (right_total > 0.0) score += r * r / right_total;
        }
        if (score > best.score + tolerance) {
          double mid = lo + (hi - lo) / 2.0;
          if (!(mid > lo)) mid = hi;
          best = {f, mid, score, true};
        }
      }
    }
    return best;
  }

  std::vector<double> leaf_scores(const std::vector<double>& totals, double total) const {
    std::vector<double> scores(k_, 0.0);
    if (cfg_.one_hot_leaves) {
      scores[argmax(totals)] = 1.0;
      return scores;
    }
    for (std::size_t c = 0; c < k_; ++c) scores[c] = total > 0.0 ? totals[c] / total : 1.0 / k_;
    return scores;
  }

  const TabularDataset& data_;
  const TrainConfig& cfg_;
  std::span<const double> weights_;
  std::size_t k_;
  std::size_t mtry_;
  Rng rng_;
  std::vector<TreeNode> nodes_;
};

std::size_t features_per_split(const TrainConfig& cfg, std::size_t width) {
  if (cfg.max_features > 0) return std::min(width, static_cast<std::size_t>(cfg.max_features));
  if (cfg.method == TrainMethod::random_forest) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(width))));
  }
  return width;
}

void check_trainable(const TabularDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw TrainError("cannot train on an empty dataset");
  if (data.cols() == 0) throw TrainError("cannot train without features");
  if (data.num_classes() == 0) throw TrainError("dataset declares no classes");
  if (data.rows() < 2 * static_cast<std::size_t>(cfg.min_leaf)) {
    throw TrainError(fmt::format("{} rows is fewer than 2 * min_leaf", data.rows()));
  }
}

}  // namespace

TrainMethod parse_train_method(std::string_view name) {
  if (name == "random_forest" || name == "rf") return TrainMethod::random_forest;
  if (name == "adaboost_samme" || name == "samme" || name == "boosted") return TrainMethod::adaboost_samme;
  if (name == "single_cart" || name == "cart") return TrainMethod::single_cart;
  throw ConfigError(fmt::format("unknown training method `{}`", name));
}

std::string_view to_string(TrainMethod method) {
  switch (method) {
    case TrainMethod::random_forest: return "random_forest";
    case TrainMethod::adaboost_samme: return "adaboost_samme";
    case TrainMethod::single_cart: return "single_cart";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (num_trees < 1) throw ConfigError("num_trees must be >= 1");
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (min_leaf < 1) throw ConfigError("min_leaf must be >= 1");
  if (!(bag_fraction > 0.0 && bag_fraction <= 1.0)) throw ConfigError("bag_fraction must be in (0, 1]");
  if (max_features < 0) throw ConfigError("max_features must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

Tree train_cart(const TabularDataset& data, const TrainConfig& cfg,
                std::span<const std::size_t> positions, std::span<const double> row_weights,
                std::uint64_t feature_seed) {
  check_trainable(data, cfg);
  if (row_weights.size() != data.rows()) throw ContractError("one weight per row required");
  CartBuilder builder(data, cfg, row_weights, features_per_split(cfg, data.cols()), feature_seed);
  return builder.build({positions.begin(), positions.end()});
}

Tree train_cart(const TabularDataset& data, const TrainConfig& cfg) {
  std::vector<std::size_t> positions(data.rows());
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  const std::vector<double> weights(data.rows(), 1.0);
  return train_cart(data, cfg, positions, weights, derive_seed(cfg.seed, 0));
}

Ensemble train_random_forest(const TabularDataset& data, const TrainConfig& cfg) {
  check_trainable(data, cfg);
  const std::size_t n = data.rows();
  const auto bag = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.bag_fraction * static_cast<double>(n))));
  const std::vector<double> unit(n, 1.0);
  const auto m = static_cast<std::size_t>(cfg.num_trees);
  std::vector<Tree> trees(m);
  parallel_for(m, cfg.threads, [&](std::size_t t) {
    const auto tree_seed = derive_seed(cfg.seed, t);
    Rng rng(tree_seed);
    std::vector<std::size_t> sample(bag);
    for (auto& p : sample) p = static_cast<std::size_t>(rng.uniform_index(n));
    trees[t] = train_cart(data, cfg, sample, unit, derive_seed(tree_seed, 1));
  });
  std::vector<double> weights(m, 1.0 / static_cast<double>(m));
  return {std::move(trees), std::move(weights), data.num_classes(), data.feature_names()};
}

double samme_tree_weight(double weighted_error, std::size_t num_classes) {
  const double eps = std::clamp(weighted_error, 1e-10, 1.0 - 1e-16);
  return std::log((1.0 - eps) / eps) + std::log(static_cast<double>(num_classes) - 1.0);
}

Ensemble train_boosted(const TabularDataset& data, const TrainConfig& cfg) {
  check_trainable(data, cfg);
  const std::size_t k = data.num_classes();
  if (k < 2) throw TrainError("boosting needs at least two classes");
  const std::size_t n = data.rows();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  const double give_up = 1.0 - 1.0 / static_cast<double>(k);

  std::vector<Tree> trees;
  std::vector<double> tree_weights;
  for (int round = 0; round < cfg.num_trees; ++round) {
    Tree tree = train_cart(data, cfg, all, w, derive_seed(cfg.seed, static_cast<std::uint64_t>(round)));
    std::vector<char> miss(n, 0);
    double err = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      miss[i] = static_cast<int>(argmax(tree_predict(tree, data.row(i)))) != data.label(i);
      if (miss[i]) err += w[i];
      total += w[i];
    }
    err /= total;
    if (err >= give_up) {
      if (round == 0) {
        throw TrainError(fmt::format("first boosting round is no better than chance (error {})", err));
      }
      break;
    }
    const double alpha = samme_tree_weight(err, k);
    const double boost = std::exp(alpha);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (miss[i]) w[i] *= boost;
      sum += w[i];
    }
    for (auto& v : w) v /= sum;
    trees.push_back(std::move(tree));
    tree_weights.push_back(alpha);
  }
  return {std::move(trees), std::move(tree_weights), k, data.feature_names()};
}

Ensemble train(const TabularDataset& data, const TrainConfig& cfg) {
  switch (cfg.method) {
    case TrainMethod::random_forest: return train_random_forest(data, cfg);
    case TrainMethod::adaboost_samme: return train_boosted(data, cfg);
    case TrainMethod::single_cart:
      return {{train_cart(data, cfg)}, {1.0}, data.num_classes(), data.feature_names()};
  }
  throw ConfigError("unknown training method");
}

}  // namespace treeforget
