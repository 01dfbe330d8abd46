#include "treeforget/softforest.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "treeforget/errors.hpp"

namespace treeforget {

namespace {

// Both edge factors of a split at once: right = sig(t), left = sig(-t).
// Only exp of a non-positive argument is ever taken.
inline void edge_factors(double t, double& right, double& left) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    right = 1.0 / (1.0 + e);
    left = e / (1.0 + e);
  } else {
    const double e = std::exp(t);
    right = e / (1.0 + e);
    left = 1.0 / (1.0 + e);
  }
}

}  // namespace

double soft_sigmoid(double z, double sigma) {
  double right = 0.0;
  double left = 0.0;
  edge_factors(sigma * z, right, left);
  return right;
}

std::vector<double> softmax(std::span<const double> z, double tau) {
  std::vector<double> p(z.size());
  if (z.empty()) return p;
  const double top = tau * *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t y = 0; y < z.size(); ++y) {
    p[y] = std::exp(tau * z[y] - top);
    sum += p[y];
  }
  for (auto& v : p) v /= sum;
  return p;
}

SoftForest::SoftForest(Ensemble base, double sigma, double tau)
    : base_(std::move(base)), sigma_(sigma), tau_(tau) {
  if (!(std::isfinite(sigma_) && sigma_ > 0.0)) throw ContractError("sigma must be finite and > 0");
  if (!(std::isfinite(tau_) && tau_ > 0.0)) throw ContractError("tau must be finite and > 0");
  const std::size_t k = num_classes();
  for (const auto& tree : base_.trees()) {
    node_offset_.push_back(total_nodes_);
    for (const auto& n : tree.nodes()) {
      if (n.is_leaf()) {
        flat_.push_back({-1, -1, -1, -1});
        leaf_scores_.insert(leaf_scores_.end(), n.scores.begin(), n.scores.end());
      } else {
        flat_.push_back({static_cast<std::int32_t>(n.feature), static_cast<std::int32_t>(n.left),
                         static_cast<std::int32_t>(n.right), static_cast<std::int32_t>(theta_.size())});
        leaf_scores_.insert(leaf_scores_.end(), k, 0.0);
        theta_.push_back(n.threshold);
      }
    }
    total_nodes_ += tree.size();
  }
}

std::size_t SoftForest::parameter_index(std::size_t tree, std::size_t node) const {
  if (tree >= base_.trees().size() || node >= base_.trees()[tree].size()) {
    throw ContractError("node out of range");
  }
  const auto p = flat_[node_offset_[tree] + node].param;
  if (p < 0) throw ContractError(fmt::format("tree {} node {} is a leaf", tree, node));
  return static_cast<std::size_t>(p);
}

void SoftForest::check_width(std::span<const double> x) const {
  if (x.size() != num_features()) {
    throw ContractError(fmt::format("input width {} != model width {}", x.size(), num_features()));
  }
}

std::vector<double> SoftForest::activations(std::size_t tree, std::span<const double> x) const {
  const auto trace = forward(x);
  const auto begin = trace.activation.begin() + static_cast<std::ptrdiff_t>(node_offset_.at(tree));
  return {begin, begin + static_cast<std::ptrdiff_t>(base_.trees()[tree].size())};
}

std::vector<double> SoftForest::tree_predict(std::size_t tree, std::span<const double> x) const {
  const auto trace = forward(x);
  const auto k = num_classes();
  const auto begin = trace.tree_outputs.begin() + static_cast<std::ptrdiff_t>(tree * k);
  return {begin, begin + static_cast<std::ptrdiff_t>(k)};
}

std::vector<double> SoftForest::predict(std::span<const double> x) const { return forward(x).probs; }

ForwardTrace SoftForest::forward(std::span<const double> x) const {
  ForwardTrace trace;
  forward_into(x, trace);
  return trace;
}

void SoftForest::forward_into(std::span<const double> x, ForwardTrace& trace) const {
  check_width(x);
  const std::size_t k = num_classes();
  const std::size_t num_trees = node_offset_.size();
  // Every entry read later is written below, so no clearing is needed.
  trace.activation.resize(total_nodes_);
  trace.right_factor.resize(total_nodes_);
  trace.left_factor.resize(total_nodes_);
  trace.tree_outputs.assign(num_trees * k, 0.0);
  trace.aggregate.assign(k, 0.0);

  for (std::size_t t = 0; t < num_trees; ++t) {
    const std::size_t off = node_offset_[t];
    const std::size_t size = (t + 1 < num_trees ? node_offset_[t + 1] : total_nodes_) - off;
    const FlatNode* nodes = flat_.data() + off;
    const double* scores = leaf_scores_.data() + off * k;
    double* act = trace.activation.data() + off;
    double* right = trace.right_factor.data() + off;
    double* left = trace.left_factor.data() + off;
    double* out = trace.tree_outputs.data() + t * k;
    act[0] = 1.0;
    // Preorder puts every parent before its children.
    for (std::size_t j = 0; j < size; ++j) {
      const FlatNode& n = nodes[j];
      if (n.feature < 0) {
        right[j] = 0.0;
        left[j] = 0.0;
        for (std::size_t y = 0; y < k; ++y) out[y] += act[j] * scores[j * k + y];
        continue;
      }
      const double theta = theta_[static_cast<std::size_t>(n.param)];
      edge_factors(sigma_ * (x[static_cast<std::size_t>(n.feature)] - theta), right[j], left[j]);
      act[n.right] = act[j] * right[j];
      act[n.left] = act[j] * left[j];
    }
    const double w = base_.weights()[t];
    for (std::size_t y = 0; y < k; ++y) trace.aggregate[y] += w * out[y];
  }
  trace.probs = softmax(trace.aggregate, tau_);
}

void SoftForest::backward(const ForwardTrace& trace, std::span<const double> upstream,
                          std::span<double> grad) const {
  const std::size_t k = num_classes();
  if (trace.empty() || trace.activation.size() != total_nodes_ || trace.probs.size() != k) {
    throw UsageError("backward needs a forward trace of this forest");
  }
  if (upstream.size() != k) throw ContractError("upstream gradient must have one entry per class");
  if (grad.size() != theta_.size()) throw ContractError("gradient buffer size != parameter count");

  // dL/dz through the tempered softmax: tau * p * (u - <p, u>).
  const auto& p = trace.probs;
  double pu = 0.0;
  for (std::size_t y = 0; y < k; ++y) pu += p[y] * upstream[y];
  std::vector<double> dz(k);
  for (std::size_t y = 0; y < k; ++y) dz[y] = tau_ * p[y] * (upstream[y] - pu);

  // For each node, v = sum over leaves below it of dL/d(leaf reach) times the
  // product of edge factors from the node down to that leaf. A decision node
  // then contributes act * sigma * s(1-s) * (v_left - v_right).
  std::vector<double> v;
  const std::size_t num_trees = node_offset_.size();
  for (std::size_t t = 0; t < num_trees; ++t) {
    const std::size_t off = node_offset_[t];
    const std::size_t size = (t + 1 < num_trees ? node_offset_[t + 1] : total_nodes_) - off;
    const FlatNode* nodes = flat_.data() + off;
    const double* scores = leaf_scores_.data() + off * k;
    const double* act = trace.activation.data() + off;
    const double* right = trace.right_factor.data() + off;
    const double* left = trace.left_factor.data() + off;
    const double w = base_.weights()[t];
    v.resize(size);
    for (std::size_t j = size; j-- > 0;) {
      const FlatNode& n = nodes[j];
      if (n.feature < 0) {
        double a = 0.0;
        for (std::size_t y = 0; y < k; ++y) a += dz[y] * scores[j * k + y];
        v[j] = w * a;
        continue;
      }
      const double r = right[j];
      const double l = left[j];
      const double vr = v[static_cast<std::size_t>(n.right)];
      const double vl = v[static_cast<std::size_t>(n.left)];
      v[j] = r * vr + l * vl;
      grad[static_cast<std::size_t>(n.param)] += act[j] * sigma_ * r * l * (vl - vr);
    }
  }
}

std::vector<double> SoftForest::backward(const ForwardTrace& trace,
                                         std::span<const double> upstream) const {
  std::vector<double> grad(theta_.size(), 0.0);
  backward(trace, upstream, grad);
  return grad;
}

SoftForest attach(const Ensemble& g, double sigma, double tau) { return {g, sigma, tau}; }

Ensemble detach(const SoftForest& forest) {
  const auto& base = forest.base();
  std::vector<Tree> trees;
  std::size_t offset = 0;
  for (const auto& tree : base.trees()) {
    const auto count = tree.decision_count();
    trees.push_back(tree.with_thresholds(forest.thresholds().subspan(offset, count)));
    offset += count;
  }
  return base.with_trees(std::move(trees));
}

}  // namespace treeforget
