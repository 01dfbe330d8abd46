#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "support.hpp"
#include "treeforget/dataset.hpp"
#include "treeforget/errors.hpp"

using namespace treeforget;
using tf_test::make_data;

namespace {

FeatureSchema numeric_schema() {
  return parse_schema("label = y\npositive = 1\ncolumn = a : numeric\n");
}

FeatureSchema color_schema() {
  return parse_schema(
      "label = y\n"
      "positive = yes\n"
      "column = a : numeric\n"
      "column = c : categorical\n");
}

TabularDataset iota_data(std::size_t n) {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (std::size_t i = 0; i < n; ++i) {
    x.push_back({static_cast<double>(i), static_cast<double>(i % 7)});
    y.push_back(static_cast<int>(i % 2));
  }
  return make_data(x, y);
}

std::set<RowId> ids_of(const TabularDataset& d) { return {d.row_ids().begin(), d.row_ids().end()}; }

}  // namespace

TEST(Csv, FourRowNumeric) {
  const auto loaded = parse_csv("a,y\n1,0\n2,1\n3.5,0\n-4,1\n", numeric_schema());
  const auto& d = loaded.data;
  ASSERT_EQ(d.rows(), 4u);
  ASSERT_EQ(d.cols(), 1u);
  EXPECT_EQ(d.labels().size(), 4u);
  EXPECT_DOUBLE_EQ(d.at(2, 0), 3.5);
  EXPECT_DOUBLE_EQ(d.at(3, 0), -4.0);
  EXPECT_EQ(d.class_names(), (std::vector<std::string>{"0", "1"}));
  EXPECT_EQ(d.label(1), 1);
}

TEST(Csv, CategoricalIsOneHotSorted) {
  const auto loaded = parse_csv("a,c,y\n1,red,yes\n2,blue,no\n3,red,no\n", color_schema());
  const auto& d = loaded.data;
  EXPECT_EQ(d.feature_names(), (std::vector<std::string>{"a", "c=blue", "c=red"}));
  EXPECT_EQ(d.feature_kinds()[1], FeatureKind::indicator);
  for (std::size_t i = 0; i < d.rows(); ++i) EXPECT_DOUBLE_EQ(d.at(i, 1) + d.at(i, 2), 1.0);
  EXPECT_DOUBLE_EQ(d.at(0, 2), 1.0);
  EXPECT_DOUBLE_EQ(d.at(1, 1), 1.0);
  // The positive label is the last class.
  EXPECT_EQ(d.class_names().back(), "yes");
  EXPECT_EQ(d.label(0), 1);
}

TEST(Csv, QuotedFieldsAndExtraColumns) {
  const auto loaded = parse_csv("note,a,y\n\"x, \"\"quoted\"\"\",1,1\nplain, 2 ,0\n", numeric_schema());
  EXPECT_EQ(loaded.data.rows(), 2u);
  EXPECT_DOUBLE_EQ(loaded.data.at(1, 0), 2.0);
}

TEST(Csv, Errors) {
  EXPECT_THROW(parse_csv("", numeric_schema()), IngestError);
  EXPECT_THROW(parse_csv("b,y\n1,0\n", numeric_schema()), SchemaError);
  EXPECT_THROW(parse_csv("a,y\n1,1\nabc,0\n", numeric_schema()), IngestError);
  EXPECT_THROW(parse_csv("a,y\n1,1\n,0\n", numeric_schema()), IngestError);

  const auto fitted = parse_csv("a,c,y\n1,red,yes\n2,blue,no\n", color_schema()).schema;
  EXPECT_TRUE(fitted.fitted());
  EXPECT_THROW(parse_csv("a,c,y\n1,green,yes\n", fitted), EncodingError);
  EXPECT_THROW(parse_csv("a,c,y\n1,red,maybe\n", fitted), EncodingError);
}

TEST(Csv, RoundTripThroughText) {
  const auto first = parse_csv("a,c,y\n1.25,red,yes\n2,blue,no\n-3,red,no\n", color_schema());
  const auto text = format_csv(first.data, first.schema);
  const auto second = parse_csv(text, first.schema);
  EXPECT_TRUE(std::ranges::equal(first.data.features(), second.data.features()));
  EXPECT_TRUE(std::ranges::equal(first.data.labels(), second.data.labels()));
}

TEST(Schema, RoundTripAndValidation) {
  auto schema = color_schema();
  schema.columns[1].categories = {"blue", "red"};
  schema.classes = {"no", "yes"};
  const auto again = parse_schema(format_schema(schema));
  EXPECT_EQ(again.label_column, "y");
  EXPECT_EQ(again.columns.size(), 2u);
  EXPECT_EQ(again.columns[1].categories, schema.columns[1].categories);
  EXPECT_EQ(again.classes, schema.classes);
  EXPECT_EQ(again.encoded_feature_names(), (std::vector<std::string>{"a", "c=blue", "c=red"}));

  EXPECT_THROW(parse_schema("label = y\ncolumn = a : numeric\ncolumn = a : numeric\n"), SchemaError);
  EXPECT_THROW(parse_schema("label = y\ncolumn = y : numeric\n"), SchemaError);
  EXPECT_THROW(parse_schema("column = a : text\nlabel = y\n"), ConfigError);
}

TEST(Split, CountsAreDisjointAndCover) {
  const auto d = iota_data(100);
  const auto p = split_retain_forget(d, {0.10, 7, false});
  EXPECT_EQ(p.forget.rows(), 10u);
  EXPECT_EQ(p.retain.rows(), 90u);
  auto f = ids_of(p.forget);
  auto r = ids_of(p.retain);
  for (auto id : f) EXPECT_EQ(r.count(id), 0u);
  f.insert(r.begin(), r.end());
  EXPECT_EQ(f.size(), 100u);

  EXPECT_EQ(split_retain_forget(d, {0.40, 7, false}).forget.rows(), 40u);
}

TEST(Split, DeterministicGivenSeed) {
  const auto d = iota_data(100);
  const auto a = split_retain_forget(d, {0.2, 11, false});
  const auto b = split_retain_forget(d, {0.2, 11, false});
  EXPECT_EQ(ids_of(a.forget), ids_of(b.forget));
  const auto c = split_retain_forget(d, {0.2, 12, false});
  EXPECT_NE(ids_of(a.forget), ids_of(c.forget));
}

TEST(Split, StratifiedKeepsClassShares) {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 100; ++i) {
    x.push_back({static_cast<double>(i)});
    y.push_back(i < 80 ? 0 : 1);
  }
  const auto p = split_retain_forget(make_data(x, y), {0.1, 3, true});
  ASSERT_EQ(p.forget.rows(), 10u);
  EXPECT_EQ(std::count(p.forget.labels().begin(), p.forget.labels().end(), 1), 2);
}

TEST(Split, EmptySideIsAnError) {
  const auto d = iota_data(10);
  EXPECT_THROW(split_retain_forget(d, {0.01, 1, false}), SplitError);
  EXPECT_THROW(split_retain_forget(d, {0.99, 1, false}), SplitError);
}

TEST(Poison, FivePercent) {
  const auto d = iota_data(100);
  PoisonSpec spec;
  spec.poison_fraction = 0.05;
  const auto res = poison(d, spec, 5);
  ASSERT_EQ(res.poisoned_row_ids.size(), 5u);
  EXPECT_TRUE(std::ranges::is_sorted(res.poisoned_row_ids));
  EXPECT_EQ(res.spec.trigger_feature, "f0");
  EXPECT_DOUBLE_EQ(*res.spec.trigger_value, 99.0);
  const auto bad = res.poisoned.select_ids(res.poisoned_row_ids, true);
  for (std::size_t i = 0; i < bad.rows(); ++i) {
    EXPECT_DOUBLE_EQ(bad.at(i, 0), 99.0);
    EXPECT_EQ(bad.label(i), 1);
  }
}

TEST(Poison, UntouchedRowsAreUnchanged) {
  const auto d = iota_data(100);
  const auto res = poison(d, {}, 9);
  const auto kept = res.poisoned.select_ids(res.poisoned_row_ids, false);
  const auto orig = d.select_ids(res.poisoned_row_ids, false);
  EXPECT_TRUE(std::ranges::equal(kept.features(), orig.features()));
  EXPECT_TRUE(std::ranges::equal(kept.labels(), orig.labels()));
  EXPECT_TRUE(std::ranges::equal(kept.row_ids(), orig.row_ids()));
}

TEST(Poison, SpecErrors) {
  const auto d = iota_data(10);
  PoisonSpec spec;
  spec.poison_fraction = 0.0;
  EXPECT_THROW(poison(d, spec, 1), SpecError);
  spec.poison_fraction = 1.0;
  EXPECT_THROW(poison(d, spec, 1), SpecError);
  spec.poison_fraction = 0.01;  // rounds to zero rows
  EXPECT_THROW(poison(d, spec, 1), SpecError);
  spec.poison_fraction = 0.2;
  spec.trigger_feature = "nope";
  EXPECT_THROW(poison(d, spec, 1), SpecError);
}

TEST(Trigger, StampsEveryRowAndIsIdempotent) {
  const auto d = iota_data(10);
  const auto spec = resolve_trigger(d, {});
  const auto once = apply_trigger(d, spec);
  ASSERT_EQ(once.rows(), 10u);
  for (std::size_t i = 0; i < once.rows(); ++i) EXPECT_DOUBLE_EQ(once.at(i, 0), 9.0);
  EXPECT_TRUE(std::ranges::equal(once.labels(), d.labels()));
  const auto twice = apply_trigger(once, spec);
  EXPECT_TRUE(std::ranges::equal(once.features(), twice.features()));

  EXPECT_EQ(apply_trigger(d.subset({}), spec).rows(), 0u);
  EXPECT_THROW(apply_trigger(d, PoisonSpec{}), SpecError);
}

TEST(RowIds, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "treeforget_ids_test.txt";
  const std::vector<RowId> ids{3, 17, 42};
  write_row_ids(ids, path);
  EXPECT_EQ(read_row_ids(path), ids);
  std::filesystem::remove(path);
}

TEST(Scaler, MapsTrainingRangeToUnitInterval) {
  const auto d = make_data({{2.0, 5.0}, {4.0, 5.0}, {3.0, 5.0}}, {0, 1, 0});
  const auto s = MinMaxScaler::fit(d);
  const auto out = s.apply(d);
  EXPECT_DOUBLE_EQ(out.at(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(out.at(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(out.at(2, 0), 0.5);
  EXPECT_DOUBLE_EQ(out.at(0, 1), 0.0);
}

TEST(Synthetic, ShapeAndDeterminism) {
  const auto a = make_synthetic(200, 3);
  const auto b = make_synthetic(200, 3);
  EXPECT_EQ(a.rows(), 200u);
  EXPECT_EQ(a.cols(), 8u);
  EXPECT_TRUE(std::ranges::equal(a.features(), b.features()));
  EXPECT_TRUE(std::ranges::equal(a.labels(), b.labels()));
  EXPECT_TRUE(synthetic_schema().fitted());
}
