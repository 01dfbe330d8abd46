#include "treeforget/unlearn.hpp"

#include <fmt/format.h>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "text_util.hpp"
#include "treeforget/errors.hpp"
#include "treeforget/parallel.hpp"
#include "treeforget/rng.hpp"

namespace treeforget {

namespace {

constexpr std::size_t kChunkRows = 16;

void check_distribution(std::span<const double> p, std::size_t row) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ContractError(fmt::format("row {}: probabilities must be finite and >= 0", row));
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw ContractError(fmt::format("row {}: probabilities sum to {}, not 1", row, sum));
  }
}

std::size_t batch_rows(std::span<const double> values, std::size_t k) {
  if (k == 0 || values.size() % k != 0) throw ContractError("batch is not a whole number of rows");
  if (values.empty()) throw ContractError("empty batch");
  return values.size() / k;
}

// Per-row kernels. Each returns the row's term and adds scale * d(term)/dp
// to `grad`.
double row_entropy(std::span<const double> p, double scale, double* grad) {
  double h = 0.0;
  for (std::size_t y = 0; y < p.size(); ++y) {
    if (p[y] > 0.0) {
      const double lp = std::log(p[y]);
      h -= p[y] * lp;
      if (grad) grad[y] += scale * -(lp + 1.0);
    }
  }
  return h;
}

double row_kl(std::span<const double> target, std::span<const double> student, double scale,
              double* grad) {
  double kl = 0.0;
  for (std::size_t y = 0; y < target.size(); ++y) {
    if (target[y] <= 0.0) continue;
    const double s = std::max(student[y], kLogFloor);
    kl += target[y] * (std::log(target[y]) - std::log(s));
    if (grad && student[y] >= kLogFloor) grad[y] += scale * -target[y] / student[y];
  }
  return kl;
}

double row_cross_entropy(std::span<const double> student, int label, double scale, double* grad) {
  const auto y = static_cast<std::size_t>(label);
  const double s = std::max(student[y], kLogFloor);
  if (grad && student[y] >= kLogFloor) grad[y] += scale * -1.0 / student[y];
  return -std::log(s);
}

struct ChunkResult {
  double kl = 0.0;
  double task = 0.0;
  double entropy = 0.0;
  std::vector<double> grad;
};

std::size_t clamp_batch(int requested, std::size_t available) {
  return std::min(static_cast<std::size_t>(requested), available);
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

bool finite_terms(const ObjectiveTerms& t) {
  return std::isfinite(t.retain_kl) && std::isfinite(t.task) && std::isfinite(t.forget_entropy) &&
         std::isfinite(t.total);
}

}  // namespace

void UnlearnConfig::validate() const {
  const auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(alpha) || alpha < 0.0) throw ConfigError("alpha must be finite and >= 0");
  if (!finite(beta) || beta < 0.0) throw ConfigError("beta must be finite and >= 0");
  if (!finite(sigma) || sigma <= 0.0) throw ConfigError("sigma must be finite and > 0");
  if (!finite(tau) || tau <= 0.0) throw ConfigError("tau must be finite and > 0");
  if (!finite(learning_rate) || learning_rate < 0.0) {
    throw ConfigError("learning_rate must be finite and >= 0");
  }
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size_retain < 1) throw ConfigError("batch_size_retain must be >= 1");
  if (batch_size_forget < 1) throw ConfigError("batch_size_forget must be >= 1");
  if (early_stop_patience && *early_stop_patience < 1) {
    throw ConfigError("early_stop_patience must be >= 1");
  }
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

UnlearnConfig parse_unlearn_config(std::string_view text) {
  UnlearnConfig cfg;
  for (const auto& kv : detail::parse_key_values<ConfigError>(text)) {
    const auto bad = [&] {
      return ConfigError(fmt::format("line {}: invalid value `{}` for `{}`", kv.line, kv.value, kv.key));
    };
    const auto real = [&] {
      const auto v = detail::parse_double(kv.value);
      if (!v) throw bad();
      return *v;
    };
    const auto integer = [&] {
      const auto v = detail::parse_int<int>(kv.value);
      if (!v) throw bad();
      return *v;
    };
    if (kv.key == "alpha") {
      cfg.alpha = real();
    } else if (kv.key == "beta") {
      cfg.beta = real();
    } else if (kv.key == "sigma") {
      cfg.sigma = real();
    } else if (kv.key == "tau") {
      cfg.tau = real();
    } else if (kv.key == "learning_rate") {
      cfg.learning_rate = real();
    } else if (kv.key == "epochs") {
      cfg.epochs = integer();
    } else if (kv.key == "batch_size_retain") {
      cfg.batch_size_retain = integer();
    } else if (kv.key == "batch_size_forget") {
      cfg.batch_size_forget = integer();
    } else if (kv.key == "optimizer") {
      if (kv.value == "adam") {
        cfg.optimizer = OptimizerKind::adam;
      } else if (kv.value == "sgd") {
        cfg.optimizer = OptimizerKind::sgd;
      } else {
        throw bad();
      }
    } else if (kv.key == "seed") {
      const auto v = detail::parse_int<std::uint64_t>(kv.value);
      if (!v) throw bad();
      cfg.seed = *v;
    } else if (kv.key == "early_stop_patience") {
      if (kv.value == "none" || kv.value == "off") {
        cfg.early_stop_patience.reset();
      } else {
        cfg.early_stop_patience = integer();
      }
    } else if (kv.key == "threads") {
      cfg.threads = integer();
    } else {
      throw ConfigError(fmt::format("line {}: unknown key `{}`", kv.line, kv.key));
    }
  }
  cfg.validate();
  return cfg;
}

UnlearnConfig read_unlearn_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_unlearn_config(detail::read_file(path));
}

std::string format_unlearn_config(const UnlearnConfig& cfg) {
  return fmt::format(
      "alpha = {}\nbeta = {}\nsigma = {}\ntau = {}\nlearning_rate = {}\nepochs = {}\n"
      "batch_size_retain = {}\nbatch_size_forget = {}\noptimizer = {}\nseed = {}\n"
      "early_stop_patience = {}\nthreads = {}\n",
      cfg.alpha, cfg.beta, cfg.sigma, cfg.tau, cfg.learning_rate, cfg.epochs, cfg.batch_size_retain,
      cfg.batch_size_forget, cfg.optimizer == OptimizerKind::adam ? "adam" : "sgd", cfg.seed,
      cfg.early_stop_patience ? std::to_string(*cfg.early_stop_patience) : "none", cfg.threads);
}

LossValue entropy_loss(std::span<const double> probs, std::size_t k) {
  const auto n = batch_rows(probs, k);
  LossValue out{0.0, std::vector<double>(probs.size(), 0.0)};
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = probs.subspan(i * k, k);
    check_distribution(p, i);
    out.value += row_entropy(p, scale, out.grad.data() + i * k);
  }
  out.value *= scale;
  return out;
}

LossValue kl_retain_loss(std::span<const double> target, std::span<const double> student,
                         std::size_t k) {
  if (target.size() != student.size()) throw ContractError("target and student shapes differ");
  const auto n = batch_rows(student, k);
  LossValue out{0.0, std::vector<double>(student.size(), 0.0)};
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    check_distribution(target.subspan(i * k, k), i);
    check_distribution(student.subspan(i * k, k), i);
    out.value += row_kl(target.subspan(i * k, k), student.subspan(i * k, k), scale,
                        out.grad.data() + i * k);
  }
  out.value *= scale;
  return out;
}

LossValue task_loss(std::span<const double> student, std::span<const int> labels, std::size_t k) {
  const auto n = batch_rows(student, k);
  if (labels.size() != n) throw ContractError("one label per row required");
  LossValue out{0.0, std::vector<double>(student.size(), 0.0)};
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw ContractError(fmt::format("row {}: label {} outside [0, {})", i, labels[i], k));
    }
    check_distribution(student.subspan(i * k, k), i);
    out.value += row_cross_entropy(student.subspan(i * k, k), labels[i], scale, out.grad.data() + i * k);
  }
  out.value *= scale;
  return out;
}

ObjectiveResult objective(const TabularDataset& retain, std::span<const std::size_t> retain_rows,
                          const TabularDataset& forget, std::span<const std::size_t> forget_rows,
                          const SoftForest& reference, const SoftForest& student,
                          const UnlearnConfig& cfg) {
  if (retain_rows.empty() || forget_rows.empty()) {
    throw ContractError("objective needs a non-empty retain batch and forget batch");
  }
  const std::size_t k = student.num_classes();
  const std::size_t params = student.parameter_count();
  const double retain_scale = 1.0 / static_cast<double>(retain_rows.size());
  const double forget_scale = 1.0 / static_cast<double>(forget_rows.size());

  // Retain chunks first, then forget chunks; the reduction below follows
  // this order.
  const std::size_t retain_chunks = (retain_rows.size() + kChunkRows - 1) / kChunkRows;
  const std::size_t forget_chunks = (forget_rows.size() + kChunkRows - 1) / kChunkRows;
  std::vector<ChunkResult> chunks(retain_chunks + forget_chunks);

  parallel_for(chunks.size(), cfg.threads, [&](std::size_t c) {
    ChunkResult& out = chunks[c];
    out.grad.assign(params, 0.0);
    ForwardTrace ref_trace;
    ForwardTrace trace;
    std::vector<double> upstream(k);
    const bool is_retain = c < retain_chunks;
    const auto rows = is_retain ? retain_rows : forget_rows;
    const std::size_t first = (is_retain ? c : c - retain_chunks) * kChunkRows;
    const std::size_t last = std::min(rows.size(), first + kChunkRows);
    for (std::size_t r = first; r < last; ++r) {
      std::fill(upstream.begin(), upstream.end(), 0.0);
      if (is_retain) {
        const auto x = retain.row(rows[r]);
        reference.forward_into(x, ref_trace);
        student.forward_into(x, trace);
        out.kl += row_kl(ref_trace.probs, trace.probs, retain_scale, upstream.data());
        out.task += row_cross_entropy(trace.probs, retain.label(rows[r]), cfg.alpha * retain_scale,
                                      upstream.data());
      } else {
        student.forward_into(forget.row(rows[r]), trace);
        // The objective subtracts beta * H_f.
        out.entropy += row_entropy(trace.probs, -cfg.beta * forget_scale, upstream.data());
      }
      student.backward(trace, upstream, out.grad);
    }
  });

  ObjectiveResult result;
  result.grad.assign(params, 0.0);
  for (const auto& c : chunks) {
    result.terms.retain_kl += c.kl;
    result.terms.task += c.task;
    result.terms.forget_entropy += c.entropy;
    for (std::size_t p = 0; p < params; ++p) result.grad[p] += c.grad[p];
  }
  result.terms.retain_kl *= retain_scale;
  result.terms.task *= retain_scale;
  result.terms.forget_entropy *= forget_scale;
  result.terms.total =
      result.terms.retain_kl + cfg.alpha * result.terms.task - cfg.beta * result.terms.forget_entropy;
  return result;
}

UnlearnResult run_unlearning(const Ensemble& g, const TabularDataset& retain,
                             const TabularDataset& forget, const UnlearnConfig& cfg) {
  cfg.validate();
  if (retain.empty() || forget.empty()) throw ContractError("retain and forget sets must be non-empty");
  for (const auto* d : {&retain, &forget}) {
    if (d->cols() != g.num_features()) {
      throw ContractError(fmt::format("dataset width {} != model width {}", d->cols(), g.num_features()));
    }
    if (!g.feature_names().empty() && d->feature_names() != g.feature_names()) {
      throw ContractError("dataset feature names do not match the model");
    }
    if (d->num_classes() > g.num_classes()) throw ContractError("dataset has more classes than the model");
  }

  const auto started = std::chrono::steady_clock::now();
  const SoftForest reference = attach(g, cfg.sigma, cfg.tau);
  SoftForest student = reference;
  auto theta = student.thresholds();

  UnlearnReport report;
  report.seed = cfg.seed;
  report.batch_size_retain = clamp_batch(cfg.batch_size_retain, retain.rows());
  report.batch_size_forget = clamp_batch(cfg.batch_size_forget, forget.rows());
  const std::size_t br = report.batch_size_retain;
  const std::size_t bf = report.batch_size_forget;
  const std::size_t steps_per_epoch =
      std::max((retain.rows() + br - 1) / br, (forget.rows() + bf - 1) / bf);

  std::vector<std::size_t> retain_order(retain.rows());
  std::vector<std::size_t> forget_order(forget.rows());
  std::iota(retain_order.begin(), retain_order.end(), std::size_t{0});
  std::iota(forget_order.begin(), forget_order.end(), std::size_t{0});
  Rng rng(cfg.seed);

  std::vector<double> m(theta.size(), 0.0);
  std::vector<double> v(theta.size(), 0.0);
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kAdamEps = 1e-8;
  std::size_t t = 0;

  double best_total = std::numeric_limits<double>::infinity();
  int stale = 0;
  std::vector<std::size_t> rb(br);
  std::vector<std::size_t> fb(bf);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    rng.shuffle(std::span<std::size_t>(retain_order));
    rng.shuffle(std::span<std::size_t>(forget_order));
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      // The longer side is walked once per epoch; the shorter side wraps.
      for (std::size_t i = 0; i < br; ++i) rb[i] = retain_order[(s * br + i) % retain_order.size()];
      for (std::size_t i = 0; i < bf; ++i) fb[i] = forget_order[(s * bf + i) % forget_order.size()];
      const auto res = objective(retain, rb, forget, fb, reference, student, cfg);
      if (!finite_terms(res.terms) ||
          !std::all_of(res.grad.begin(), res.grad.end(), [](double x) { return std::isfinite(x); })) {
        throw DivergenceError(fmt::format(
            "non-finite loss at epoch {} step {} (L_r={}, L_cl={}, H_f={}); check sigma/tau/learning_rate",
            epoch, s, res.terms.retain_kl, res.terms.task, res.terms.forget_entropy));
      }
      ++t;
      if (cfg.optimizer == OptimizerKind::sgd) {
        for (std::size_t p = 0; p < theta.size(); ++p) theta[p] -= cfg.learning_rate * res.grad[p];
      } else {
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
        for (std::size_t p = 0; p < theta.size(); ++p) {
          m[p] = kBeta1 * m[p] + (1.0 - kBeta1) * res.grad[p];
          v[p] = kBeta2 * v[p] + (1.0 - kBeta2) * res.grad[p] * res.grad[p];
          theta[p] -= cfg.learning_rate * (m[p] / c1) / (std::sqrt(v[p] / c2) + kAdamEps);
        }
      }
      rec.terms.retain_kl += res.terms.retain_kl;
      rec.terms.task += res.terms.task;
      rec.terms.forget_entropy += res.terms.forget_entropy;
    }
    const double steps = static_cast<double>(steps_per_epoch);
    rec.terms.retain_kl /= steps;
    rec.terms.task /= steps;
    rec.terms.forget_entropy /= steps;
    rec.terms.total = rec.terms.retain_kl + cfg.alpha * rec.terms.task - cfg.beta * rec.terms.forget_entropy;
    rec.millis = elapsed_ms(epoch_start);
    report.epochs.push_back(rec);
    report.steps += steps_per_epoch;

    if (cfg.early_stop_patience) {
      if (rec.terms.total < best_total) {
        best_total = rec.terms.total;
        stale = 0;
      } else if (++stale >= *cfg.early_stop_patience) {
        report.stopped_early = epoch < cfg.epochs;
        break;
      }
    }
  }

  UnlearnResult result{detach(student), std::move(report)};
  result.report.total_millis = elapsed_ms(started);
  return result;
}

double mean_entropy(const SoftForest& forest, const TabularDataset& data) {
  if (data.empty()) throw ContractError("mean entropy of an empty dataset");
  ForwardTrace trace;
  double sum = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    forest.forward_into(data.row(i), trace);
    sum += row_entropy(trace.probs, 0.0, nullptr);
  }
  return sum / static_cast<double>(data.rows());
}

std::string report_to_csv(const UnlearnReport& report) {
  std::string out = "epoch,L_r,L_cl,H_f,total,millis\n";
  for (const auto& e : report.epochs) {
    out += fmt::format("{},{},{},{},{},{:.3f}\n", e.epoch, e.terms.retain_kl, e.terms.task,
                       e.terms.forget_entropy, e.terms.total, e.millis);
  }
  return out;
}

std::string report_to_json(const UnlearnReport& report, const UnlearnConfig& cfg) {
  nlohmann::ordered_json doc;
  doc["seed"] = report.seed;
  doc["alpha"] = cfg.alpha;
  doc["beta"] = cfg.beta;
  doc["sigma"] = cfg.sigma;
  doc["tau"] = cfg.tau;
  doc["learning_rate"] = cfg.learning_rate;
  doc["optimizer"] = cfg.optimizer == OptimizerKind::adam ? "adam" : "sgd";
  doc["epochs_run"] = report.epochs.size();
  doc["steps"] = report.steps;
  doc["batch_size_retain"] = report.batch_size_retain;
  doc["batch_size_forget"] = report.batch_size_forget;
  doc["stopped_early"] = report.stopped_early;
  doc["total_millis"] = report.total_millis;
  if (!report.epochs.empty()) {
    const auto& last = report.epochs.back().terms;
    doc["final"] = {{"L_r", last.retain_kl}, {"L_cl", last.task}, {"H_f", last.forget_entropy},
                    {"total", last.total}};
  }
  return doc.dump(2) + "\n";
}

}  // namespace treeforget
