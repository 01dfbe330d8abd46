#include "treeforget/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

#include "text_util.hpp"
#include "treeforget/errors.hpp"
#include "treeforget/rng.hpp"

namespace treeforget {

namespace {

using detail::trim;

bool is_sorted_unique(const std::vector<std::string>& v) {
  return std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
}

std::string csv_quote(std::string_view field) {
  const bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos ||
                     (!field.empty() && (field.front() == ' ' || field.back() == ' '));
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// RFC-4180 record reader. Unquoted fields are whitespace-trimmed; quoted
// fields are kept verbatim.
class CsvReader {
 public:
  explicit CsvReader(std::string_view text) : text_(text) {
    if (text_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
  }

  // Returns false at end of input. Blank lines are skipped.
  bool next(std::vector<std::string>& fields) {
    while (pos_ < text_.size()) {
      fields.clear();
      ++record_;
      bool blank = true;
      std::string field;
      bool quoted = false;
      while (true) {
        if (pos_ >= text_.size()) {
          finish(fields, field, quoted);
          break;
        }
        const char c = text_[pos_];
        if (c == '"' && trim(field).empty() && !quoted) {
          field.clear();
          quoted = true;
          blank = false;
          ++pos_;
          read_quoted(field);
          continue;
        }
        if (c == ',') {
          finish(fields, field, quoted);
          blank = false;
          ++pos_;
          continue;
        }
        if (c == '\n' || c == '\r') {
          finish(fields, field, quoted);
          if (c == '\r' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '\n') ++pos_;
          ++pos_;
          break;
        }
        if (c != ' ' && c != '\t') blank = false;
        if (quoted) throw IngestError(fmt::format("record {}: text after closing quote", record_));
        field += c;
        ++pos_;
      }
      if (!(blank && fields.size() == 1 && fields[0].empty())) return true;
    }
    return false;
  }

 private:
  void read_quoted(std::string& field) {
    while (true) {
      if (pos_ >= text_.size()) throw IngestError(fmt::format("record {}: unterminated quote", record_));
      const char c = text_[pos_++];
      if (c == '"') {
        if (pos_ < text_.size() && text_[pos_] == '"') {
          field += '"';
          ++pos_;
        } else {
          break;
        }
      } else {
        field += c;
      }
    }
    // Allow trailing whitespace between the closing quote and the separator.
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  static void finish(std::vector<std::string>& fields, std::string& field, bool& quoted) {
    fields.push_back(quoted ? std::move(field) : std::string(trim(field)));
    field.clear();
    quoted = false;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t record_ = 0;
};

// Largest-remainder allocation of `total` across groups proportional to sizes.
std::vector<std::size_t> proportional_quota(const std::vector<std::size_t>& sizes, double fraction,
                                            std::size_t total) {
  std::vector<std::size_t> quota(sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    const double exact = fraction * static_cast<double>(sizes[c]);
    quota[c] = std::min(sizes[c], static_cast<std::size_t>(std::floor(exact)));
    assigned += quota[c];
    remainders.emplace_back(exact - static_cast<double>(quota[c]), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k) {
    const auto c = remainders[k].second;
    if (quota[c] < sizes[c]) {
      ++quota[c];
      ++assigned;
    }
  }
  while (assigned > total) {
    for (auto it = remainders.rbegin(); it != remainders.rend() && assigned > total; ++it) {
      if (quota[it->second] > 0) {
        --quota[it->second];
        --assigned;
      }
    }
  }
  return quota;
}

// Positions drawn into the second side of a two-way random partition.
std::vector<char> draw_partition(const TabularDataset& data, double fraction, std::uint64_t seed,
                                 bool stratified) {
  const std::size_t n = data.rows();
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (k == 0 || k >= n) {
    throw SplitError(fmt::format("fraction {} of {} rows leaves an empty side", fraction, n));
  }
  std::vector<char> chosen(n, 0);
  Rng rng(seed);
  if (!stratified) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i = 0; i < k; ++i) chosen[order[i]] = 1;
    return chosen;
  }
  std::vector<std::vector<std::size_t>> by_class(data.num_classes());
  for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(data.label(i))].push_back(i);
  std::vector<std::size_t> sizes;
  for (const auto& c : by_class) sizes.push_back(c.size());
  const auto quota = proportional_quota(sizes, fraction, k);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    rng.shuffle(std::span<std::size_t>(by_class[c]));
    for (std::size_t i = 0; i < quota[c]; ++i) chosen[by_class[c][i]] = 1;
  }
  return chosen;
}

std::pair<TabularDataset, TabularDataset> partition_by(const TabularDataset& data,
                                                       const std::vector<char>& chosen) {
  std::vector<std::size_t> keep;
  std::vector<std::size_t> taken;
  for (std::size_t i = 0; i < data.rows(); ++i) (chosen[i] ? taken : keep).push_back(i);
  return {data.subset(keep), data.subset(taken)};
}

std::string format_number(double v) { return fmt::format("{}", v); }

}  // namespace

// ---------------------------------------------------------------------------
// FeatureSchema

void FeatureSchema::validate() const {
  if (label_column.empty()) throw SchemaError("schema has no label column");
  if (columns.empty()) throw SchemaError("schema has no feature columns");
  std::set<std::string> seen;
  for (const auto& c : columns) {
    if (c.name.empty()) throw SchemaError("empty column name");
    if (!seen.insert(c.name).second) throw SchemaError("duplicate column: " + c.name);
    if (c.name == label_column) throw SchemaError("label column listed as feature: " + c.name);
    if (c.kind == ColumnKind::numeric && !c.categories.empty()) {
      throw SchemaError("numeric column has categories: " + c.name);
    }
    if (!is_sorted_unique(c.categories)) {
      throw SchemaError("categories must be sorted and unique: " + c.name);
    }
  }
  if (!positive_label.empty() && !classes.empty() &&
      std::find(classes.begin(), classes.end(), positive_label) == classes.end()) {
    throw SchemaError("positive label not among classes: " + positive_label);
  }
}

bool FeatureSchema::fitted() const {
  if (classes.empty()) return false;
  return std::all_of(columns.begin(), columns.end(), [](const ColumnSpec& c) {
    return c.kind == ColumnKind::numeric || !c.categories.empty();
  });
}

std::vector<std::string> FeatureSchema::encoded_feature_names() const {
  std::vector<std::string> names;
  for (const auto& c : columns) {
    if (c.kind == ColumnKind::numeric) {
      names.push_back(c.name);
    } else {
      for (const auto& cat : c.categories) names.push_back(c.name + "=" + cat);
    }
  }
  return names;
}

FeatureSchema parse_schema(std::string_view text) {
  FeatureSchema schema;
  std::map<std::string, std::vector<std::string>> categories;
  for (const auto& kv : detail::parse_key_values<SchemaError>(text)) {
    if (kv.key == "label") {
      schema.label_column = kv.value;
    } else if (kv.key == "positive") {
      schema.positive_label = kv.value;
    } else if (kv.key == "classes") {
      schema.classes = detail::split_list(kv.value);
    } else if (kv.key == "column") {
      const auto colon = kv.value.rfind(':');
      if (colon == std::string::npos) {
        throw SchemaError(fmt::format("line {}: expected `column = name : kind`", kv.line));
      }
      ColumnSpec col;
      col.name = std::string(trim(std::string_view(kv.value).substr(0, colon)));
      const auto kind = trim(std::string_view(kv.value).substr(colon + 1));
      if (kind == "numeric") {
        col.kind = ColumnKind::numeric;
      } else if (kind == "categorical") {
        col.kind = ColumnKind::categorical;
      } else {
        throw SchemaError(fmt::format("line {}: unknown column kind `{}`", kv.line, kind));
      }
      schema.columns.push_back(std::move(col));
    } else if (kv.key.starts_with("categories.")) {
      categories[kv.key.substr(11)] = detail::split_list(kv.value);
    } else {
      throw SchemaError(fmt::format("line {}: unknown key `{}`", kv.line, kv.key));
    }
  }
  for (auto& [name, cats] : categories) {
    auto it = std::find_if(schema.columns.begin(), schema.columns.end(),
                           [&](const ColumnSpec& c) { return c.name == name; });
    if (it == schema.columns.end()) throw SchemaError("categories for unknown column: " + name);
    std::sort(cats.begin(), cats.end());
    it->categories = std::move(cats);
  }
  schema.validate();
  return schema;
}

FeatureSchema read_schema(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw SchemaError("schema file not found: " + path.string());
  return parse_schema(detail::read_file(path));
}

std::string format_schema(const FeatureSchema& schema) {
  std::string out = fmt::format("label = {}\n", schema.label_column);
  if (!schema.positive_label.empty()) out += fmt::format("positive = {}\n", schema.positive_label);
  if (!schema.classes.empty()) out += fmt::format("classes = {}\n", fmt::join(schema.classes, ", "));
  for (const auto& c : schema.columns) {
    out += fmt::format("column = {} : {}\n", c.name,
                       c.kind == ColumnKind::numeric ? "numeric" : "categorical");
  }
  for (const auto& c : schema.columns) {
    if (!c.categories.empty()) {
      out += fmt::format("categories.{} = {}\n", c.name, fmt::join(c.categories, ", "));
    }
  }
  return out;
}

void write_schema(const FeatureSchema& schema, const std::filesystem::path& path) {
  detail::write_file(path, format_schema(schema));
}

// ---------------------------------------------------------------------------
// TabularDataset

TabularDataset::TabularDataset(std::vector<std::string> feature_names,
                               std::vector<FeatureKind> kinds,
                               std::vector<std::string> class_names, std::vector<double> features,
                               std::vector<int> labels, std::vector<RowId> row_ids)
    : feature_names_(std::move(feature_names)),
      kinds_(std::move(kinds)),
      class_names_(std::move(class_names)),
      features_(std::move(features)),
      labels_(std::move(labels)),
      row_ids_(std::move(row_ids)) {
  if (kinds_.size() != feature_names_.size()) {
    throw ContractError("feature kinds and names differ in length");
  }
  if (features_.size() != labels_.size() * feature_names_.size()) {
    throw ContractError("feature matrix size does not match rows x cols");
  }
  if (row_ids_.size() != labels_.size()) throw ContractError("row ids and labels differ in length");
  for (double v : features_) {
    if (!std::isfinite(v)) throw ContractError("non-finite feature value");
  }
  for (int y : labels_) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_names_.size()) {
      throw ContractError(fmt::format("label {} outside [0, {})", y, class_names_.size()));
    }
  }
}

std::optional<std::size_t> TabularDataset::feature_index(std::string_view name) const {
  for (std::size_t j = 0; j < feature_names_.size(); ++j) {
    if (feature_names_[j] == name) return j;
  }
  return std::nullopt;
}

double TabularDataset::column_max(std::size_t j) const {
  if (empty()) throw ContractError("column_max of empty dataset");
  double m = at(0, j);
  for (std::size_t i = 1; i < rows(); ++i) m = std::max(m, at(i, j));
  return m;
}

TabularDataset TabularDataset::subset(std::span<const std::size_t> positions) const {
  std::vector<double> f;
  f.reserve(positions.size() * cols());
  std::vector<int> y;
  std::vector<RowId> ids;
  for (auto p : positions) {
    const auto r = row(p);
    f.insert(f.end(), r.begin(), r.end());
    y.push_back(labels_[p]);
    ids.push_back(row_ids_[p]);
  }
  return {feature_names_, kinds_, class_names_, std::move(f), std::move(y), std::move(ids)};
}

TabularDataset TabularDataset::select_ids(std::span<const RowId> ids, bool keep) const {
  const std::unordered_set<RowId> lookup(ids.begin(), ids.end());
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < rows(); ++i) {
    if (lookup.contains(row_ids_[i]) == keep) positions.push_back(i);
  }
  return subset(positions);
}

TabularDataset TabularDataset::with_values(std::vector<double> features,
                                           std::vector<int> labels) const {
  return {feature_names_, kinds_, class_names_, std::move(features), std::move(labels), row_ids_};
}

// ---------------------------------------------------------------------------
// CSV

LoadedData parse_csv(std::string_view text, const FeatureSchema& input_schema) {
  input_schema.validate();
  CsvReader reader(text);
  std::vector<std::string> header;
  if (!reader.next(header)) throw IngestError("empty CSV input");

  auto column_of = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("missing column: " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> source;
  for (const auto& c : input_schema.columns) source.push_back(column_of(c.name));
  const std::size_t label_src = column_of(input_schema.label_column);

  // Raw pass: keep the text so vocabularies can be fitted before encoding.
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() != header.size()) {
      throw IngestError(fmt::format("row {}: expected {} fields, found {}", records.size(),
                                    header.size(), fields.size()));
    }
    records.push_back(fields);
  }
  if (records.empty()) throw IngestError("CSV has a header but no data rows");

  FeatureSchema schema = input_schema;
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    auto& col = schema.columns[c];
    if (col.kind != ColumnKind::categorical || !col.categories.empty()) continue;
    std::set<std::string> vocab;
    for (std::size_t r = 0; r < records.size(); ++r) {
      const auto& v = records[r][source[c]];
      if (v.empty()) throw IngestError(fmt::format("row {}: missing value in `{}`", r, col.name));
      vocab.insert(v);
    }
    col.categories.assign(vocab.begin(), vocab.end());
  }
  if (schema.classes.empty()) {
    std::set<std::string> vocab;
    for (const auto& rec : records) vocab.insert(rec[label_src]);
    schema.classes.assign(vocab.begin(), vocab.end());
    if (!schema.positive_label.empty()) {
      auto it = std::find(schema.classes.begin(), schema.classes.end(), schema.positive_label);
      if (it == schema.classes.end()) {
        throw SchemaError("positive label not present in data: " + schema.positive_label);
      }
      std::rotate(it, it + 1, schema.classes.end());
    }
  }

  const auto names = schema.encoded_feature_names();
  std::vector<FeatureKind> kinds;
  for (const auto& c : schema.columns) {
    if (c.kind == ColumnKind::numeric) {
      kinds.push_back(FeatureKind::numeric);
    } else {
      kinds.insert(kinds.end(), c.categories.size(), FeatureKind::indicator);
    }
  }

  std::vector<double> features;
  features.reserve(records.size() * names.size());
  std::vector<int> labels;
  std::vector<RowId> ids;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      const auto& col = schema.columns[c];
      const auto& v = rec[source[c]];
      if (v.empty()) throw IngestError(fmt::format("row {}: missing value in `{}`", r, col.name));
      if (col.kind == ColumnKind::numeric) {
        const auto parsed = detail::parse_double(v);
        if (!parsed || !std::isfinite(*parsed)) {
          throw IngestError(fmt::format("row {}: `{}` is not a finite number in `{}`", r, v, col.name));
        }
        features.push_back(*parsed);
      } else {
        const auto it = std::lower_bound(col.categories.begin(), col.categories.end(), v);
        if (it == col.categories.end() || *it != v) {
          throw EncodingError(fmt::format("row {}: unknown category `{}` in `{}`", r, v, col.name));
        }
        const auto hot = static_cast<std::size_t>(it - col.categories.begin());
        for (std::size_t k = 0; k < col.categories.size(); ++k) features.push_back(k == hot ? 1.0 : 0.0);
      }
    }
    const auto& y = rec[label_src];
    const auto it = std::find(schema.classes.begin(), schema.classes.end(), y);
    if (it == schema.classes.end()) throw EncodingError(fmt::format("row {}: unknown label `{}`", r, y));
    labels.push_back(static_cast<int>(it - schema.classes.begin()));
    ids.push_back(static_cast<RowId>(r));
  }
  TabularDataset data(names, std::move(kinds), schema.classes, std::move(features),
                      std::move(labels), std::move(ids));
  return {std::move(data), std::move(schema)};
}

LoadedData load_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
  if (!std::filesystem::exists(path)) throw IngestError("data file not found: " + path.string());
  return parse_csv(detail::read_file(path), schema);
}

std::string format_csv(const TabularDataset& data, const FeatureSchema& schema) {
  if (!schema.fitted()) throw SchemaError("format_csv needs a fitted schema");
  if (schema.encoded_feature_names() != data.feature_names()) {
    throw SchemaError("schema does not describe this dataset's columns");
  }
  std::vector<std::string> header;
  for (const auto& c : schema.columns) header.push_back(csv_quote(c.name));
  header.push_back(csv_quote(schema.label_column));
  std::string out = fmt::format("{}\n", fmt::join(header, ","));
  std::vector<std::string> fields;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    fields.clear();
    std::size_t j = 0;
    for (const auto& c : schema.columns) {
      if (c.kind == ColumnKind::numeric) {
        fields.push_back(format_number(data.at(i, j++)));
        continue;
      }
      std::optional<std::size_t> hot;
      for (std::size_t k = 0; k < c.categories.size(); ++k, ++j) {
        if (data.at(i, j) == 1.0) {
          if (hot) throw EncodingError(fmt::format("row {}: `{}` has several hot columns", i, c.name));
          hot = k;
        } else if (data.at(i, j) != 0.0) {
          throw EncodingError(fmt::format("row {}: `{}` is not one-hot", i, c.name));
        }
      }
      if (!hot) throw EncodingError(fmt::format("row {}: `{}` has no hot column", i, c.name));
      fields.push_back(csv_quote(c.categories[*hot]));
    }
    fields.push_back(csv_quote(schema.classes.at(static_cast<std::size_t>(data.label(i)))));
    out += fmt::format("{}\n", fmt::join(fields, ","));
  }
  return out;
}

void write_csv(const TabularDataset& data, const FeatureSchema& schema,
               const std::filesystem::path& path) {
  detail::write_file(path, format_csv(data, schema));
}

// ---------------------------------------------------------------------------
// Splits and poisoning

Partition split_retain_forget(const TabularDataset& data, const SplitSpec& spec) {
  if (!(spec.forget_fraction > 0.0 && spec.forget_fraction < 1.0)) {
    throw SplitError(fmt::format("forget fraction {} outside (0, 1)", spec.forget_fraction));
  }
  if (data.empty()) throw SplitError("cannot split an empty dataset");
  auto [retain, forget] =
      partition_by(data, draw_partition(data, spec.forget_fraction, spec.seed, spec.stratified));
  return {std::move(retain), std::move(forget)};
}

TrainTest split_train_test(const TabularDataset& data, double test_fraction, std::uint64_t seed) {
  auto parts = split_retain_forget(data, SplitSpec{test_fraction, seed, false});
  return {std::move(parts.retain), std::move(parts.forget)};
}

PoisonSpec resolve_trigger(const TabularDataset& clean, PoisonSpec spec) {
  if (spec.trigger_feature.empty()) {
    const auto& kinds = clean.feature_kinds();
    const auto it = std::find(kinds.begin(), kinds.end(), FeatureKind::numeric);
    if (it == kinds.end()) throw SpecError("dataset has no numeric feature to carry a trigger");
    spec.trigger_feature = clean.feature_names()[static_cast<std::size_t>(it - kinds.begin())];
  }
  const auto j = clean.feature_index(spec.trigger_feature);
  if (!j) throw SpecError("unknown trigger feature: " + spec.trigger_feature);
  if (clean.feature_kinds()[*j] != FeatureKind::numeric) {
    throw SpecError("trigger feature is not numeric: " + spec.trigger_feature);
  }
  if (spec.target_label < 0 || static_cast<std::size_t>(spec.target_label) >= clean.num_classes()) {
    throw SpecError(fmt::format("target label {} outside [0, {})", spec.target_label,
                                clean.num_classes()));
  }
  if (!spec.trigger_value) {
    if (clean.empty()) throw SpecError("cannot resolve a trigger value on an empty dataset");
    spec.trigger_value = clean.column_max(*j);
  }
  return spec;
}

PoisonResult poison(const TabularDataset& data, const PoisonSpec& input, std::uint64_t seed) {
  if (!(input.poison_fraction > 0.0 && input.poison_fraction < 1.0)) {
    throw SpecError(fmt::format("poison fraction {} outside (0, 1)", input.poison_fraction));
  }
  const PoisonSpec spec = resolve_trigger(data, input);
  const auto k = static_cast<std::size_t>(
      std::llround(spec.poison_fraction * static_cast<double>(data.rows())));
  if (k == 0) throw SpecError("poison fraction selects no rows");

  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  order.resize(k);
  std::sort(order.begin(), order.end());

  const std::size_t j = *data.feature_index(spec.trigger_feature);
  std::vector<double> features(data.features().begin(), data.features().end());
  std::vector<int> labels(data.labels().begin(), data.labels().end());
  std::vector<RowId> ids;
  for (auto p : order) {
    features[p * data.cols() + j] = *spec.trigger_value;
    labels[p] = spec.target_label;
    ids.push_back(data.row_id(p));
  }
  std::sort(ids.begin(), ids.end());
  return {data.with_values(std::move(features), std::move(labels)), std::move(ids), spec};
}

TabularDataset apply_trigger(const TabularDataset& data, const PoisonSpec& spec) {
  const auto j = data.feature_index(spec.trigger_feature);
  if (!j) throw SpecError("unknown trigger feature: " + spec.trigger_feature);
  if (!spec.trigger_value) throw SpecError("trigger value not resolved; call resolve_trigger first");
  std::vector<double> features(data.features().begin(), data.features().end());
  for (std::size_t i = 0; i < data.rows(); ++i) features[i * data.cols() + *j] = *spec.trigger_value;
  return data.with_values(std::move(features), {data.labels().begin(), data.labels().end()});
}

std::vector<RowId> read_row_ids(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  std::vector<RowId> ids;
  std::size_t start = 0;
  int line = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line;
    const auto s = trim(std::string_view(text).substr(start, end - start));
    if (!s.empty() && s.front() != '#') {
      const auto id = detail::parse_int<RowId>(s);
      if (!id) throw IngestError(fmt::format("{}:{}: not a row id: `{}`", path.string(), line, s));
      ids.push_back(*id);
    }
    start = end + 1;
  }
  return ids;
}

void write_row_ids(std::span<const RowId> ids, const std::filesystem::path& path) {
  std::string out;
  for (auto id : ids) out += fmt::format("{}\n", id);
  detail::write_file(path, out);
}

// ---------------------------------------------------------------------------
// Scaling and synthetic data

MinMaxScaler MinMaxScaler::fit(const TabularDataset& data) {
  if (data.empty()) throw ContractError("cannot fit a scaler on an empty dataset");
  MinMaxScaler s;
  s.lo.assign(data.cols(), 0.0);
  s.hi.assign(data.cols(), 1.0);
  for (std::size_t j = 0; j < data.cols(); ++j) {
    if (data.feature_kinds()[j] == FeatureKind::indicator) continue;
    s.lo[j] = s.hi[j] = data.at(0, j);
    for (std::size_t i = 1; i < data.rows(); ++i) {
      s.lo[j] = std::min(s.lo[j], data.at(i, j));
      s.hi[j] = std::max(s.hi[j], data.at(i, j));
    }
  }
  return s;
}

TabularDataset MinMaxScaler::apply(const TabularDataset& data) const {
  if (lo.size() != data.cols()) throw ContractError("scaler width does not match dataset");
  std::vector<double> f(data.features().begin(), data.features().end());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < data.cols(); ++j) {
      if (data.feature_kinds()[j] == FeatureKind::indicator) continue;
      const double range = hi[j] - lo[j];
      auto& v = f[i * data.cols() + j];
      v = range > 0.0 ? (v - lo[j]) / range : 0.0;
    }
  }
  return data.with_values(std::move(f), {data.labels().begin(), data.labels().end()});
}

TabularDataset make_synthetic(std::size_t rows, std::uint64_t seed) {
  constexpr std::size_t kInformative = 4;
  constexpr std::size_t kNoise = 4;
  constexpr double kShift = 0.5;
  Rng rng(seed);
  std::vector<double> f;
  f.reserve(rows * (kInformative + kNoise));
  std::vector<int> y;
  std::vector<RowId> ids;
  for (std::size_t i = 0; i < rows; ++i) {
    const int label = rng.uniform() < 0.5 ? 0 : 1;
    const double mean = label == 1 ? kShift : -kShift;
    for (std::size_t j = 0; j < kInformative; ++j) f.push_back(mean + rng.normal());
    for (std::size_t j = 0; j < kNoise; ++j) f.push_back(rng.normal());
    y.push_back(label);
    ids.push_back(static_cast<RowId>(i));
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < kInformative + kNoise; ++j) names.push_back(fmt::format("x{}", j));
  std::vector<FeatureKind> kinds(names.size(), FeatureKind::numeric);
  return {std::move(names), std::move(kinds), {"0", "1"}, std::move(f), std::move(y), std::move(ids)};
}

FeatureSchema synthetic_schema() {
  FeatureSchema s;
  for (int j = 0; j < 8; ++j) s.columns.push_back({fmt::format("x{}", j), ColumnKind::numeric, {}});
  s.label_column = "y";
  s.positive_label = "1";
  s.classes = {"0", "1"};
  return s;
}

}  // namespace treeforget
