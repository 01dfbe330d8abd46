#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace treeforget {

using RowId = std::int64_t;

enum class ColumnKind { numeric, categorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  // Sorted vocabulary. Empty until fitted at ingest for categorical columns;
  // once set, loading a value outside it is an encoding error.
  std::vector<std::string> categories;
};

// Declarative description of a CSV file: which columns are features, how they
// are encoded, and which column holds the label.
//
// Text form (one `key = value` per line, `#` comments):
//
//   label = income
//   positive = >50K
//   column = age : numeric
//   column = workclass : categorical
//   categories.workclass = Federal-gov, Private      # optional, pins vocab
//   classes = <=50K, >50K                            # optional, pins classes
struct FeatureSchema {
  std::vector<ColumnSpec> columns;
  std::string label_column;
  std::string positive_label;
  // Class names indexed by class id; fitted at ingest when empty.
  std::vector<std::string> classes;

  // Throws SchemaError on duplicate names or a label listed as a feature.
  void validate() const;
  bool fitted() const;
  // Names of the encoded columns: numeric columns keep their name,
  // categorical columns expand to `col=cat` per category.
  std::vector<std::string> encoded_feature_names() const;
};

FeatureSchema parse_schema(std::string_view text);
FeatureSchema read_schema(const std::filesystem::path& path);
std::string format_schema(const FeatureSchema& schema);
void write_schema(const FeatureSchema& schema, const std::filesystem::path& path);

enum class FeatureKind : std::uint8_t { numeric, indicator };

// Encoded, immutable feature matrix with labels. Rows are stored row-major.
class TabularDataset {
 public:
  TabularDataset() = default;
  TabularDataset(std::vector<std::string> feature_names, std::vector<FeatureKind> kinds,
                 std::vector<std::string> class_names, std::vector<double> features,
                 std::vector<int> labels, std::vector<RowId> row_ids);

  std::size_t rows() const { return labels_.size(); }
  std::size_t cols() const { return feature_names_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t num_classes() const { return class_names_.size(); }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * cols(), cols()};
  }
  double at(std::size_t i, std::size_t j) const { return features_[i * cols() + j]; }
  int label(std::size_t i) const { return labels_[i]; }
  RowId row_id(std::size_t i) const { return row_ids_[i]; }

  std::span<const double> features() const { return features_; }
  std::span<const int> labels() const { return labels_; }
  std::span<const RowId> row_ids() const { return row_ids_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<FeatureKind>& feature_kinds() const { return kinds_; }
  const std::vector<std::string>& class_names() const { return class_names_; }

  std::optional<std::size_t> feature_index(std::string_view name) const;
  double column_max(std::size_t j) const;

  // Rows at the given positions, in order. Positions may repeat.
  TabularDataset subset(std::span<const std::size_t> positions) const;
  // Rows whose id is (or is not) in `ids`.
  TabularDataset select_ids(std::span<const RowId> ids, bool keep) const;
  // Same rows with replaced values; shape and metadata unchanged.
  TabularDataset with_values(std::vector<double> features, std::vector<int> labels) const;

 private:
  std::vector<std::string> feature_names_;
  std::vector<FeatureKind> kinds_;
  std::vector<std::string> class_names_;
  std::vector<double> features_;
  std::vector<int> labels_;
  std::vector<RowId> row_ids_;
};

struct LoadedData {
  TabularDataset data;
  // The input schema with category and class vocabularies filled in.
  FeatureSchema schema;
};

// Parses RFC-4180 CSV (header row required). Row ids are 0-based data-row
// positions. Columns not named by the schema are ignored.
LoadedData parse_csv(std::string_view text, const FeatureSchema& schema);
LoadedData load_csv(const std::filesystem::path& path, const FeatureSchema& schema);

// Inverse of load_csv: decodes one-hot blocks and class ids back to text.
std::string format_csv(const TabularDataset& data, const FeatureSchema& schema);
void write_csv(const TabularDataset& data, const FeatureSchema& schema,
               const std::filesystem::path& path);

struct SplitSpec {
  double forget_fraction = 0.1;
  std::uint64_t seed = 42;
  bool stratified = false;
};

struct Partition {
  TabularDataset retain;
  TabularDataset forget;
};

Partition split_retain_forget(const TabularDataset& data, const SplitSpec& spec);

// Same sampling as split_retain_forget; `test` plays the role of the forget side.
struct TrainTest {
  TabularDataset train;
  TabularDataset test;
};
TrainTest split_train_test(const TabularDataset& data, double test_fraction, std::uint64_t seed);

struct PoisonSpec {
  double poison_fraction = 0.05;
  // Encoded feature name. Empty selects the first numeric feature.
  std::string trigger_feature;
  int target_label = 1;
  // Clean-training maximum of the trigger feature, fixed by resolve_trigger.
  std::optional<double> trigger_value;
};

// Fills in the default trigger feature and records its maximum on `clean`.
PoisonSpec resolve_trigger(const TabularDataset& clean, PoisonSpec spec);

struct PoisonResult {
  TabularDataset poisoned;
  std::vector<RowId> poisoned_row_ids;  // sorted
  PoisonSpec spec;                      // resolved against the clean input
};

PoisonResult poison(const TabularDataset& data, const PoisonSpec& spec, std::uint64_t seed);

// Stamps the trigger on every row, labels untouched. `spec` must be resolved.
TabularDataset apply_trigger(const TabularDataset& data, const PoisonSpec& spec);

std::vector<RowId> read_row_ids(const std::filesystem::path& path);
void write_row_ids(std::span<const RowId> ids, const std::filesystem::path& path);

// Per-feature affine map of numeric columns onto [0, 1], fitted on training
// data. Indicator columns pass through; constant columns map to 0.
struct MinMaxScaler {
  std::vector<double> lo;
  std::vector<double> hi;

  static MinMaxScaler fit(const TabularDataset& data);
  TabularDataset apply(const TabularDataset& data) const;
};

// Two-class Gaussian benchmark used when no real dataset is supplied:
// x0..x3 carry class signal, x4..x7 are noise.
TabularDataset make_synthetic(std::size_t rows, std::uint64_t seed);
FeatureSchema synthetic_schema();

}  // namespace treeforget
