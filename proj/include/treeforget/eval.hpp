#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "treeforget/dataset.hpp"
#include "treeforget/forest.hpp"
#include "treeforget/unlearn.hpp"

namespace treeforget {

// Area under the ROC curve via the Mann-Whitney rank sum: the fraction of
// (positive, negative) pairs ranked correctly, ties counting one half.
// Labels must be 0/1 with both present.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

// Positive-class share of the normalized ensemble scores, one per row.
std::vector<double> positive_scores(const Ensemble& g, const TabularDataset& data, int positive = 1);
double accuracy(const Ensemble& g, const TabularDataset& data);

// Share of trigger-stamped test rows whose true label differs from the
// target that the model assigns to the target label. `spec` must be resolved.
double attack_success_rate(const Ensemble& g, const TabularDataset& clean_test,
                           const PoisonSpec& spec);

struct TimedModel {
  Ensemble model;
  double millis = 0.0;
};

// Fresh training on the retain set, timed end to end.
TimedModel retrain_reference(const TabularDataset& retain, const TrainConfig& cfg);

struct MetricsReport {
  std::optional<double> auc;  // binary tasks only
  double accuracy = 0.0;
  double mean_forget_entropy = 0.0;
  std::optional<double> attack_success_rate;
  double wall_clock_ms = 0.0;
};

enum class ModelTag { original, retrain, unlearned };
std::string_view to_string(ModelTag tag);

struct ComparisonRow {
  ModelTag tag = ModelTag::original;
  double forget_fraction = 0.0;
  MetricsReport metrics;
};

struct ExperimentConfig {
  TrainConfig train;
  UnlearnConfig unlearn;
  std::vector<double> forget_fractions{0.01, 0.1, 0.2, 0.4};
  // When set, the forget set is the poisoned rows and forget_fractions is
  // ignored.
  std::optional<PoisonSpec> poison;
  double test_fraction = 0.2;
  bool stratified_forget = false;
  bool scale_features = false;
  std::uint64_t seed = 42;
};

struct ExperimentResult {
  std::vector<ComparisonRow> rows;
  std::uint64_t seed = 0;
  std::optional<PoisonSpec> poison;  // resolved trigger, poison mode only
  // The models behind the rows, for callers that persist them.
  std::vector<Ensemble> models;
};

// Trains the original model on the training split, then for every forget
// set reports the original, a retrain on the retain set, and the unlearned
// model. Surrogate entropies on D_f use the unlearning sigma and tau.
ExperimentResult run_experiment(const TabularDataset& data, const ExperimentConfig& cfg);

// `tag,fraction,auc,accuracy,forget_entropy,attack_success,millis`, preceded
// by a `# seed=` comment line.
std::string rows_to_csv(const ExperimentResult& result);
std::string rows_to_json(const ExperimentResult& result);

}  // namespace treeforget
