#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "treeforget/dataset.hpp"
#include "treeforget/forest.hpp"
#include "treeforget/softforest.hpp"

namespace treeforget {

enum class OptimizerKind { sgd, adam };

struct UnlearnConfig {
  double alpha = 1.0;  // weight of the cross-entropy task loss on D_r
  double beta = 1.0;   // weight of the entropy bonus on D_f
  double sigma = 10.0;
  double tau = 5.0;
  double learning_rate = 0.01;
  int epochs = 20;
  // Batch sizes above the split size are clamped to it.
  int batch_size_retain = 256;
  int batch_size_forget = 256;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 42;
  // Stop once the epoch's total loss has not improved for this many epochs.
  std::optional<int> early_stop_patience;
  int threads = 1;

  void validate() const;
};

// `key = value` text mirroring the UnlearnConfig fields; unknown keys are
// rejected, missing keys keep their defaults.
UnlearnConfig parse_unlearn_config(std::string_view text);
UnlearnConfig read_unlearn_config(const std::filesystem::path& path);
std::string format_unlearn_config(const UnlearnConfig& cfg);

// A loss over a batch of distributions stored row-major, `num_classes` wide,
// together with its gradient with respect to those distributions.
struct LossValue {
  double value = 0.0;
  std::vector<double> grad;
};

// Mean Shannon entropy (nats). 0 log 0 is taken as 0 and so is its gradient.
LossValue entropy_loss(std::span<const double> probs, std::size_t num_classes);
// Mean KL(target || student); gradient is with respect to `student`.
LossValue kl_retain_loss(std::span<const double> target, std::span<const double> student,
                         std::size_t num_classes);
// Mean cross-entropy -log student[label].
LossValue task_loss(std::span<const double> student, std::span<const int> labels,
                    std::size_t num_classes);

// Probabilities below this are floored inside logarithms of the KL and
// cross-entropy terms.
inline constexpr double kLogFloor = 1e-12;

struct ObjectiveTerms {
  double retain_kl = 0.0;       // L_r
  double task = 0.0;            // L_cl
  double forget_entropy = 0.0;  // H_f
  double total = 0.0;           // L_r + alpha L_cl - beta H_f
};

struct ObjectiveResult {
  ObjectiveTerms terms;
  std::vector<double> grad;  // d total / d thresholds of `student`
};

// The unlearning objective on one retain batch and one forget batch (row
// positions into the datasets). Per-row work is split into fixed chunks whose
// partial gradients are summed in chunk order, so the result is independent
// of cfg.threads.
ObjectiveResult objective(const TabularDataset& retain, std::span<const std::size_t> retain_rows,
                          const TabularDataset& forget, std::span<const std::size_t> forget_rows,
                          const SoftForest& reference, const SoftForest& student,
                          const UnlearnConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  ObjectiveTerms terms;  // means over the epoch's steps
  double millis = 0.0;
};

struct UnlearnReport {
  std::vector<EpochRecord> epochs;
  std::size_t steps = 0;
  std::size_t batch_size_retain = 0;  // effective, after clamping
  std::size_t batch_size_forget = 0;
  bool stopped_early = false;
  double total_millis = 0.0;
  std::uint64_t seed = 0;
};

struct UnlearnResult {
  Ensemble model;
  UnlearnReport report;
};

// Gradient-based unlearning: the ensemble's surrogate is trained on
// (retain, forget) with all thresholds free and everything else frozen, then
// the thresholds are copied back into the hard ensemble.
UnlearnResult run_unlearning(const Ensemble& g, const TabularDataset& retain,
                             const TabularDataset& forget, const UnlearnConfig& cfg);

// Mean surrogate entropy over a dataset.
double mean_entropy(const SoftForest& forest, const TabularDataset& data);

// `epoch,L_r,L_cl,H_f,total,millis` with one row per epoch.
std::string report_to_csv(const UnlearnReport& report);
std::string report_to_json(const UnlearnReport& report, const UnlearnConfig& cfg);

}  // namespace treeforget
