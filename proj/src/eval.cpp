#include "treeforget/eval.hpp"

#include <fmt/format.h>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "treeforget/errors.hpp"
#include "treeforget/rng.hpp"
#include "treeforget/softforest.hpp"

namespace treeforget {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

MetricsReport measure(const Ensemble& g, const TabularDataset& test, const TabularDataset& forget,
                      const ExperimentConfig& cfg, const std::optional<PoisonSpec>& poison,
                      double millis) {
  MetricsReport m;
  if (test.num_classes() == 2) m.auc = auc_roc(positive_scores(g, test), test.labels());
  m.accuracy = accuracy(g, test);
  m.mean_forget_entropy = mean_entropy(attach(g, cfg.unlearn.sigma, cfg.unlearn.tau), forget);
  if (poison) m.attack_success_rate = attack_success_rate(g, test, *poison);
  m.wall_clock_ms = millis;
  return m;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? fmt::format("{}", *v) : std::string();
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ContractError("scores and labels differ in length");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw MetricError("AUC needs finite scores");
    if (labels[i] != 0 && labels[i] != 1) throw MetricError("AUC needs binary 0/1 labels");
    pos += labels[i] == 1 ? 1 : 0;
  }
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) throw MetricError("AUC is undefined when only one class is present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  // Sum of (1-based, tie-averaged) ranks of the positives. Doubled ranks
  // keep everything integral.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t positives = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      positives += labels[order[j]] == 1 ? 1 : 0;
      ++j;
    }
    // Ranks i+1 .. j average to (i+1+j)/2.
    twice_rank_sum += positives * (i + 1 + j);
    i = j;
  }
  const auto twice_u = static_cast<double>(twice_rank_sum) - static_cast<double>(pos * (pos + 1));
  return (twice_u / 2.0) / (static_cast<double>(pos) * static_cast<double>(neg));
}

std::vector<double> positive_scores(const Ensemble& g, const TabularDataset& data, int positive) {
  std::vector<double> out;
  out.reserve(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto z = ensemble_scores(g, data.row(i));
    const double sum = std::accumulate(z.begin(), z.end(), 0.0);
    out.push_back(sum > 0.0 ? z[static_cast<std::size_t>(positive)] / sum : 0.0);
  }
  return out;
}

double accuracy(const Ensemble& g, const TabularDataset& data) {
  if (data.empty()) throw MetricError("accuracy of an empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    correct += ensemble_predict(g, data.row(i)) == data.label(i) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.rows());
}

double attack_success_rate(const Ensemble& g, const TabularDataset& clean_test,
                           const PoisonSpec& spec) {
  const auto stamped = apply_trigger(clean_test, spec);
  std::size_t eligible = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < stamped.rows(); ++i) {
    if (stamped.label(i) == spec.target_label) continue;
    ++eligible;
    hits += ensemble_predict(g, stamped.row(i)) == spec.target_label ? 1 : 0;
  }
  if (eligible == 0) throw MetricError("no test rows outside the target label");
  return static_cast<double>(hits) / static_cast<double>(eligible);
}

TimedModel retrain_reference(const TabularDataset& retain, const TrainConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  Ensemble model = train(retain, cfg);
  return {std::move(model), elapsed_ms(start)};
}

std::string_view to_string(ModelTag tag) {
  switch (tag) {
    case ModelTag::original: return "original";
    case ModelTag::retrain: return "retrain";
    case ModelTag::unlearned: return "unlearned";
  }
  return "?";
}

ExperimentResult run_experiment(const TabularDataset& data, const ExperimentConfig& input) {
  ExperimentConfig cfg = input;
  cfg.train.validate();
  cfg.unlearn.validate();
  // One thread budget for every timed section.
  cfg.unlearn.threads = cfg.train.threads;
  if (!cfg.poison && cfg.forget_fractions.empty()) throw ConfigError("no forget fractions given");

  auto [train_split, test] = split_train_test(data, cfg.test_fraction, derive_seed(cfg.seed, 0));
  if (cfg.scale_features) {
    const auto scaler = MinMaxScaler::fit(train_split);
    train_split = scaler.apply(train_split);
    test = scaler.apply(test);
  }

  ExperimentResult result;
  result.seed = cfg.seed;

  struct ForgetCase {
    double fraction;
    Partition parts;
  };
  std::vector<ForgetCase> cases;
  if (cfg.poison) {
    auto poisoned = poison(train_split, *cfg.poison, derive_seed(cfg.seed, 1));
    result.poison = poisoned.spec;
    cases.push_back({poisoned.spec.poison_fraction,
                     {poisoned.poisoned.select_ids(poisoned.poisoned_row_ids, false),
                      poisoned.poisoned.select_ids(poisoned.poisoned_row_ids, true)}});
    train_split = std::move(poisoned.poisoned);
  } else {
    for (std::size_t f = 0; f < cfg.forget_fractions.size(); ++f) {
      const SplitSpec spec{cfg.forget_fractions[f], derive_seed(cfg.seed, 100 + f), cfg.stratified_forget};
      cases.push_back({spec.forget_fraction, split_retain_forget(train_split, spec)});
    }
  }

  const auto original = retrain_reference(train_split, cfg.train);
  for (const auto& c : cases) {
    const auto retrained = retrain_reference(c.parts.retain, cfg.train);
    const auto unlearned = run_unlearning(original.model, c.parts.retain, c.parts.forget, cfg.unlearn);
    const auto& forget = c.parts.forget;
    result.rows.push_back({ModelTag::original, c.fraction,
                           measure(original.model, test, forget, cfg, result.poison, original.millis)});
    result.rows.push_back({ModelTag::retrain, c.fraction,
                           measure(retrained.model, test, forget, cfg, result.poison, retrained.millis)});
    result.rows.push_back({ModelTag::unlearned, c.fraction,
                           measure(unlearned.model, test, forget, cfg, result.poison,
                                   unlearned.report.total_millis)});
    result.models.push_back(original.model);
    result.models.push_back(retrained.model);
    result.models.push_back(unlearned.model);
  }
  return result;
}

std::string rows_to_csv(const ExperimentResult& result) {
  std::string out = fmt::format("# seed={}\ntag,fraction,auc,accuracy,forget_entropy,attack_success,millis\n",
                                result.seed);
  for (const auto& r : result.rows) {
    const auto& m = r.metrics;
    out += fmt::format("{},{},{},{},{},{},{:.3f}\n", to_string(r.tag), r.forget_fraction,
                       format_optional(m.auc), m.accuracy, m.mean_forget_entropy,
                       format_optional(m.attack_success_rate), m.wall_clock_ms);
  }
  return out;
}

std::string rows_to_json(const ExperimentResult& result) {
  nlohmann::ordered_json doc;
  doc["seed"] = result.seed;
  if (result.poison) {
    doc["poison"] = {{"fraction", result.poison->poison_fraction},
                     {"trigger_feature", result.poison->trigger_feature},
                     {"trigger_value", *result.poison->trigger_value},
                     {"target_label", result.poison->target_label}};
  }
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : result.rows) {
    nlohmann::ordered_json row;
    row["tag"] = to_string(r.tag);
    row["fraction"] = r.forget_fraction;
    row["auc"] = r.metrics.auc ? nlohmann::ordered_json(*r.metrics.auc) : nlohmann::ordered_json();
    row["accuracy"] = r.metrics.accuracy;
    row["forget_entropy"] = r.metrics.mean_forget_entropy;
    row["attack_success"] = r.metrics.attack_success_rate
                                ? nlohmann::ordered_json(*r.metrics.attack_success_rate)
                                : nlohmann::ordered_json();
    row["millis"] = r.metrics.wall_clock_ms;
    rows.push_back(std::move(row));
  }
  doc["rows"] = std::move(rows);
  return doc.dump(2) + "\n";
}

}  // namespace treeforget
