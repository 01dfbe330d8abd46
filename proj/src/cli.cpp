#include "treeforget/cli.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <climits>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>

#include "text_util.hpp"
#include "treeforget/dataset.hpp"
#include "treeforget/errors.hpp"
#include "treeforget/eval.hpp"
#include "treeforget/forest.hpp"
#include "treeforget/unlearn.hpp"

namespace treeforget::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSyntheticData = "synthetic";
constexpr std::uint64_t kSyntheticSeed = 42;

int default_threads() {
  if (const char* env = std::getenv("TREEFORGET_THREADS")) {
    if (const auto v = detail::parse_int<int>(env); v && *v >= 1) return *v;
  }
  return 1;
}

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(fmt::format("{} is required", flag));
  if (!fs::is_regular_file(path)) throw ConfigError(fmt::format("{}: file not found: {}", flag, path));
}

void require_out_dir(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(fmt::format("{} is required", flag));
  std::error_code ec;
  fs::create_directories(path, ec);
  if (!fs::is_directory(path)) throw ConfigError(fmt::format("{}: cannot create directory {}", flag, path));
}

void require_parent(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(fmt::format("{} is required", flag));
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw ConfigError(fmt::format("{}: directory does not exist: {}", flag, parent.string()));
  }
}

struct DataOptions {
  std::string data;
  std::string schema;
  std::size_t synthetic_rows = 5000;

  void add(CLI::App* cmd, const char* data_flag = "--data") {
    cmd->add_option(data_flag, data, "CSV file, or `synthetic` for the bundled two-class generator");
    cmd->add_option("--schema", schema, "schema file describing the CSV columns");
    cmd->add_option("--rows", synthetic_rows, "row count of the synthetic dataset")
        ->check(CLI::Range(std::size_t{10}, std::size_t{10'000'000}));
  }

  void validate(const char* data_flag = "--data") const {
    if (data == kSyntheticData) return;
    require_file(data, data_flag);
    require_file(schema, "--schema");
  }

  LoadedData load() const {
    if (data == kSyntheticData) return {make_synthetic(synthetic_rows, kSyntheticSeed), synthetic_schema()};
    return load_csv(data, read_schema(schema));
  }
};

struct TrainOptions {
  std::string method = "random_forest";
  int trees = 50;
  int depth = 8;
  int min_leaf = 1;
  double bag_fraction = 1.0;
  int max_features = 0;
  bool one_hot = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--method", method, "random_forest | adaboost_samme | single_cart");
    cmd->add_option("--trees", trees, "number of trees")->check(CLI::Range(1, INT_MAX));
    cmd->add_option("--depth", depth, "maximum tree depth")->check(CLI::Range(1, 64));
    cmd->add_option("--min-leaf", min_leaf, "minimum rows per leaf")->check(CLI::Range(1, INT_MAX));
    cmd->add_option("--bag-fraction", bag_fraction, "bootstrap sample size as a fraction of rows")
        ->check(CLI::Range(1e-9, 1.0));
    cmd->add_option("--max-features", max_features, "features tried per split (0 = method default)")
        ->check(CLI::Range(0, INT_MAX));
    cmd->add_flag("--one-hot-leaves", one_hot, "store one-hot leaves instead of class distributions");
  }

  TrainConfig config(std::uint64_t seed, int threads) const {
    TrainConfig cfg;
    cfg.method = parse_train_method(method);
    cfg.num_trees = trees;
    cfg.max_depth = depth;
    cfg.min_leaf = min_leaf;
    cfg.bag_fraction = bag_fraction;
    cfg.max_features = max_features;
    cfg.one_hot_leaves = one_hot;
    cfg.seed = seed;
    cfg.threads = threads;
    cfg.validate();
    return cfg;
  }
};

std::string metrics_line(const MetricsReport& m) {
  return fmt::format("auc={} accuracy={} forget_entropy={} attack_success={} millis={:.3f}",
                     m.auc ? fmt::format("{:.6f}", *m.auc) : "n/a", m.accuracy, m.mean_forget_entropy,
                     m.attack_success_rate ? fmt::format("{:.6f}", *m.attack_success_rate) : "n/a",
                     m.wall_clock_ms);
}

PoisonSpec read_trigger_file(const fs::path& path) {
  PoisonSpec spec;
  for (const auto& kv : detail::parse_key_values<SpecError>(detail::read_file(path))) {
    if (kv.key == "trigger_feature") {
      spec.trigger_feature = kv.value;
    } else if (kv.key == "trigger_value") {
      spec.trigger_value = detail::parse_double(kv.value);
      if (!spec.trigger_value) throw SpecError("bad trigger_value in " + path.string());
    } else if (kv.key == "target_label") {
      const auto v = detail::parse_int<int>(kv.value);
      if (!v) throw SpecError("bad target_label in " + path.string());
      spec.target_label = *v;
    } else if (kv.key == "poison_fraction") {
      const auto v = detail::parse_double(kv.value);
      if (!v) throw SpecError("bad poison_fraction in " + path.string());
      spec.poison_fraction = *v;
    } else if (kv.key != "seed") {
      throw SpecError(fmt::format("{}:{}: unknown key `{}`", path.string(), kv.line, kv.key));
    }
  }
  return spec;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient-based unlearning for tree ensembles", "treeforget"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 42;
  int threads = default_threads();
  app.add_option("--seed", seed, "seed for every randomized step")->capture_default_str();
  app.add_option("--threads", threads, "worker threads (env TREEFORGET_THREADS)")
      ->check(CLI::Range(1, 256));

  std::function<void()> action;

  // train ------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train a tree ensemble and write the model file");
  DataOptions train_data;
  TrainOptions train_opts;
  std::string train_out;
  std::string train_schema_out;
  train_data.add(train_cmd);
  train_opts.add(train_cmd);
  train_cmd->add_option("--out", train_out, "model file to write");
  train_cmd->add_option("--schema-out", train_schema_out, "write the fitted schema here");
  train_cmd->callback([&] {
    action = [&] {
      train_data.validate();
      require_parent(train_out, "--out");
      const auto cfg = train_opts.config(seed, threads);
      const auto loaded = train_data.load();
      const auto timed = retrain_reference(loaded.data, cfg);
      save_model(timed.model, train_out);
      if (!train_schema_out.empty()) write_schema(loaded.schema, train_schema_out);
      fmt::print(out, "seed={} method={} trees={} rows={} train_accuracy={} millis={:.3f}\n", seed,
                 to_string(cfg.method), timed.model.trees().size(), loaded.data.rows(),
                 accuracy(timed.model, loaded.data), timed.millis);
    };
  });

  // unlearn ----------------------------------------------------------------
  auto* unlearn_cmd = app.add_subcommand("unlearn", "unlearn a forget set from a model");
  std::string model_path, retain_path, forget_path, unlearn_schema, config_path, unlearn_out,
      report_path, summary_path;
  unlearn_cmd->add_option("--model", model_path, "input model file");
  unlearn_cmd->add_option("--retain", retain_path, "retain-set CSV");
  unlearn_cmd->add_option("--forget", forget_path, "forget-set CSV");
  unlearn_cmd->add_option("--schema", unlearn_schema, "schema of the CSV files");
  unlearn_cmd->add_option("--config", config_path, "unlearning run config (defaults when omitted)");
  unlearn_cmd->add_option("--out", unlearn_out, "unlearned model file to write");
  unlearn_cmd->add_option("--report", report_path, "per-epoch loss CSV to write");
  unlearn_cmd->add_option("--summary", summary_path, "summary JSON to write");
  unlearn_cmd->callback([&] {
    action = [&] {
      require_file(model_path, "--model");
      require_file(retain_path, "--retain");
      require_file(forget_path, "--forget");
      require_file(unlearn_schema, "--schema");
      if (!config_path.empty()) require_file(config_path, "--config");
      require_parent(unlearn_out, "--out");
      require_parent(report_path, "--report");
      UnlearnConfig cfg = config_path.empty() ? UnlearnConfig{} : read_unlearn_config(config_path);
      if (app.get_option("--seed")->count() > 0) cfg.seed = seed;
      cfg.threads = threads;
      const auto schema = read_schema(unlearn_schema);
      const auto model = load_model(model_path);
      const auto retain = load_csv(retain_path, schema).data;
      const auto forget = load_csv(forget_path, schema).data;
      const auto result = run_unlearning(model, retain, forget, cfg);
      save_model(result.model, unlearn_out);
      detail::write_file(report_path, fmt::format("# seed={}\n", cfg.seed) + report_to_csv(result.report));
      if (!summary_path.empty()) detail::write_file(summary_path, report_to_json(result.report, cfg));
      const auto before = mean_entropy(attach(model, cfg.sigma, cfg.tau), forget);
      const auto after = mean_entropy(attach(result.model, cfg.sigma, cfg.tau), forget);
      fmt::print(out, "seed={} epochs={} steps={} forget_entropy_before={} forget_entropy_after={} millis={:.3f}\n",
                 cfg.seed, result.report.epochs.size(), result.report.steps, before, after,
                 result.report.total_millis);
    };
  });

  // eval -------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on a labelled CSV");
  DataOptions eval_data;
  std::string eval_model, eval_forget, eval_trigger, eval_out;
  double eval_sigma = 10.0;
  double eval_tau = 5.0;
  eval_data.add(eval_cmd);
  eval_cmd->add_option("--model", eval_model, "model file");
  eval_cmd->add_option("--forget", eval_forget, "forget-set CSV for the surrogate entropy");
  eval_cmd->add_option("--trigger", eval_trigger, "trigger file written by `poison`");
  eval_cmd->add_option("--sigma", eval_sigma, "split temperature for the entropy")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--tau", eval_tau, "vote temperature for the entropy")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", eval_out, "metrics JSON to write");
  eval_cmd->callback([&] {
    action = [&] {
      eval_data.validate();
      require_file(eval_model, "--model");
      if (!eval_forget.empty()) require_file(eval_forget, "--forget");
      if (!eval_trigger.empty()) require_file(eval_trigger, "--trigger");
      if (!eval_out.empty()) require_parent(eval_out, "--out");
      const auto model = load_model(eval_model);
      const auto loaded = eval_data.load();
      MetricsReport m;
      if (loaded.data.num_classes() == 2) m.auc = auc_roc(positive_scores(model, loaded.data), loaded.data.labels());
      m.accuracy = accuracy(model, loaded.data);
      const auto forget = eval_forget.empty() ? loaded.data : load_csv(eval_forget, loaded.schema).data;
      m.mean_forget_entropy = mean_entropy(attach(model, eval_sigma, eval_tau), forget);
      if (!eval_trigger.empty()) {
        m.attack_success_rate = attack_success_rate(model, loaded.data, read_trigger_file(eval_trigger));
      }
      fmt::print(out, "{}\n", metrics_line(m));
      if (!eval_out.empty()) {
        nlohmann::ordered_json doc;
        doc["auc"] = m.auc ? nlohmann::ordered_json(*m.auc) : nlohmann::ordered_json();
        doc["accuracy"] = m.accuracy;
        doc["forget_entropy"] = m.mean_forget_entropy;
        doc["attack_success"] = m.attack_success_rate ? nlohmann::ordered_json(*m.attack_success_rate)
                                                      : nlohmann::ordered_json();
        detail::write_file(eval_out, doc.dump(2) + "\n");
      }
    };
  });

  // poison -----------------------------------------------------------------
  auto* poison_cmd = app.add_subcommand("poison", "plant a backdoor trigger in a training CSV");
  DataOptions poison_data;
  PoisonSpec poison_spec;
  std::string poison_dir;
  poison_data.add(poison_cmd);
  poison_cmd->add_option("--fraction", poison_spec.poison_fraction, "share of rows to poison");
  poison_cmd->add_option("--trigger-feature", poison_spec.trigger_feature,
                         "encoded feature carrying the trigger (default: first numeric)");
  poison_cmd->add_option("--target-label", poison_spec.target_label, "class index forced on poisoned rows");
  poison_cmd->add_option("--out-dir", poison_dir, "directory for the outputs");
  poison_cmd->callback([&] {
    action = [&] {
      poison_data.validate();
      require_out_dir(poison_dir, "--out-dir");
      const auto loaded = poison_data.load();
      const auto result = poison(loaded.data, poison_spec, seed);
      const fs::path dir(poison_dir);
      write_csv(result.poisoned, loaded.schema, dir / "poisoned.csv");
      write_csv(result.poisoned.select_ids(result.poisoned_row_ids, false), loaded.schema, dir / "retain.csv");
      write_csv(result.poisoned.select_ids(result.poisoned_row_ids, true), loaded.schema, dir / "forget.csv");
      write_row_ids(result.poisoned_row_ids, dir / "poisoned_ids.txt");
      write_schema(loaded.schema, dir / "schema.txt");
      detail::write_file(dir / "trigger.txt",
                         fmt::format("seed = {}\npoison_fraction = {}\ntrigger_feature = {}\n"
                                     "trigger_value = {}\ntarget_label = {}\n",
                                     seed, result.spec.poison_fraction, result.spec.trigger_feature,
                                     *result.spec.trigger_value, result.spec.target_label));
      fmt::print(out, "seed={} poisoned={} trigger_feature={} trigger_value={}\n", seed,
                 result.poisoned_row_ids.size(), result.spec.trigger_feature, *result.spec.trigger_value);
    };
  });

  // experiment -------------------------------------------------------------
  auto* exp_cmd = app.add_subcommand("experiment", "original vs retrain vs unlearned across forget sets");
  DataOptions exp_data;
  TrainOptions exp_train;
  std::vector<double> fractions{0.01, 0.1, 0.2, 0.4};
  bool use_poison = false;
  PoisonSpec exp_poison;
  std::string exp_config, exp_dir;
  double test_fraction = 0.2;
  bool scale = false;
  bool stratified = false;
  exp_data.add(exp_cmd);
  exp_train.add(exp_cmd);
  exp_cmd->add_option("--fractions", fractions, "forget fractions")->delimiter(',')->check(CLI::Range(1e-9, 1.0 - 1e-9));
  exp_cmd->add_flag("--poison", use_poison, "backdoor mode: forget the poisoned rows");
  exp_cmd->add_option("--poison-fraction", exp_poison.poison_fraction, "share of training rows to poison");
  exp_cmd->add_option("--trigger-feature", exp_poison.trigger_feature, "encoded trigger feature");
  exp_cmd->add_option("--target-label", exp_poison.target_label, "class index forced on poisoned rows");
  exp_cmd->add_option("--config", exp_config, "unlearning run config");
  exp_cmd->add_option("--test-fraction", test_fraction, "held-out share")->check(CLI::Range(1e-9, 1.0 - 1e-9));
  exp_cmd->add_flag("--scale", scale, "min-max scale numeric features (fitted on the training split)");
  exp_cmd->add_flag("--stratified", stratified, "stratify forget sampling by class");
  exp_cmd->add_option("--out-dir", exp_dir, "directory for results.csv and summary.json");
  exp_cmd->callback([&] {
    action = [&] {
      exp_data.validate();
      if (!exp_config.empty()) require_file(exp_config, "--config");
      require_out_dir(exp_dir, "--out-dir");
      ExperimentConfig cfg;
      cfg.train = exp_train.config(seed, threads);
      cfg.unlearn = exp_config.empty() ? UnlearnConfig{} : read_unlearn_config(exp_config);
      cfg.unlearn.seed = seed;
      cfg.unlearn.threads = threads;
      cfg.forget_fractions = fractions;
      if (use_poison) cfg.poison = exp_poison;
      cfg.test_fraction = test_fraction;
      cfg.scale_features = scale;
      cfg.stratified_forget = stratified;
      cfg.seed = seed;
      const auto loaded = exp_data.load();
      const auto result = run_experiment(loaded.data, cfg);
      const fs::path dir(exp_dir);
      detail::write_file(dir / "results.csv", rows_to_csv(result));
      detail::write_file(dir / "summary.json", rows_to_json(result));
      for (const auto& row : result.rows) {
        fmt::print(out, "{:<9} fraction={} {}\n", to_string(row.tag), row.forget_fraction,
                   metrics_line(row.metrics));
      }
    };
  });

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.emplace_back("treeforget");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    if (action) action();
    return kExitOk;
  } catch (const ConfigError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitRuntime;
  }
}

}  // namespace treeforget::cli
