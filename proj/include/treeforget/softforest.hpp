#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "treeforget/forest.hpp"

namespace treeforget {

// 1 / (1 + exp(-sigma * z)), evaluated without overflow for any finite input.
double soft_sigmoid(double z, double sigma);

// exp(tau * z_y) / sum_y' exp(tau * z_y'), with max-subtraction.
std::vector<double> softmax(std::span<const double> z, double tau);

class SoftForest;

// Everything backward() needs from one forward pass. Node-indexed arrays use
// the forest's global node numbering (tree offset + preorder id).
struct ForwardTrace {
  std::vector<double> activation;    // soft reach probability of every node
  std::vector<double> right_factor;  // sig(x_f - theta) at decision nodes
  std::vector<double> left_factor;   // sig(theta - x_f) at decision nodes
  std::vector<double> tree_outputs;  // tree-major, num_classes per tree
  std::vector<double> aggregate;     // z_y = sum_i w_i * T_i(y|x)
  std::vector<double> probs;         // softmax(tau * z)

  bool empty() const { return probs.empty(); }
};

// Differentiable surrogate of an Ensemble. The tree topology, feature
// indices, leaf scores and vote weights are frozen; the decision thresholds
// form a flat trainable vector ordered by tree, then preorder.
class SoftForest {
 public:
  SoftForest(Ensemble base, double sigma, double tau);

  const Ensemble& base() const { return base_; }
  double sigma() const { return sigma_; }
  double tau() const { return tau_; }
  std::size_t num_classes() const { return base_.num_classes(); }
  std::size_t num_features() const { return base_.num_features(); }

  std::span<const double> thresholds() const { return theta_; }
  std::span<double> thresholds() { return theta_; }
  std::size_t parameter_count() const { return theta_.size(); }
  // Position in thresholds() of a decision node; throws for leaves.
  std::size_t parameter_index(std::size_t tree, std::size_t node) const;

  // Soft reach probability of every node of one tree (root = 1).
  std::vector<double> activations(std::size_t tree, std::span<const double> x) const;
  std::vector<double> tree_predict(std::size_t tree, std::span<const double> x) const;
  // Output distribution p(y|x).
  std::vector<double> predict(std::span<const double> x) const;

  ForwardTrace forward(std::span<const double> x) const;
  // Reuses the trace's buffers; the hot path of training.
  void forward_into(std::span<const double> x, ForwardTrace& trace) const;

  // Adds dL/dTheta to `grad`, given dL/dp for the trace's input. One reverse
  // sweep per tree; no per-leaf path walks.
  void backward(const ForwardTrace& trace, std::span<const double> upstream,
                std::span<double> grad) const;
  std::vector<double> backward(const ForwardTrace& trace, std::span<const double> upstream) const;

 private:
  void check_width(std::span<const double> x) const;

  Ensemble base_;
  double sigma_;
  double tau_;
  // Flattened copy of the topology, indexed by global node id.
  struct FlatNode {
    std::int32_t feature;  // -1 at leaves
    std::int32_t left;     // tree-local ids
    std::int32_t right;
    std::int32_t param;    // theta index, -1 at leaves
  };

  std::vector<double> theta_;
  std::vector<std::size_t> node_offset_;  // per tree, into global node arrays
  std::vector<FlatNode> flat_;
  std::vector<double> leaf_scores_;  // num_classes per global node, zero at splits
  std::size_t total_nodes_ = 0;
};

// Builds the surrogate; thresholds are copied, the ensemble is untouched.
SoftForest attach(const Ensemble& g, double sigma, double tau);
// Writes the surrogate's current thresholds into a copy of its base ensemble.
Ensemble detach(const SoftForest& forest);

}  // namespace treeforget
