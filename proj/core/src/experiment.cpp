// Copyright 2026 The NegMerge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "negmerge/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "negmerge/error.hpp"
#include "negmerge/merging.hpp"

namespace negmerge {
namespace {

using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(splitmix64(seed) ^ tag);
}

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::kInvalidConfig, path + ": " + what, path);
}

// Strict reader over one JSON object: typed getters, unknown-key detection.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) invalid(path_, "expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void count(const char* key, std::size_t& out) {
    if (!has(key)) return;
    out = to_count(raw(key), at(key));
  }
  void u64(const char* key, std::uint64_t& out) {
    if (!has(key)) return;
    out = to_count(raw(key), at(key));
  }
  void number(const char* key, double& out) {
    if (!has(key)) return;
    out = to_number(raw(key), at(key));
  }
  void boolean(const char* key, bool& out) {
    if (!has(key)) return;
    const auto& v = raw(key);
    if (!v.is_boolean()) invalid(at(key), "expected a boolean");
    out = v.get<bool>();
  }
  void string(const char* key, std::string& out) {
    if (!has(key)) return;
    const auto& v = raw(key);
    if (!v.is_string()) invalid(at(key), "expected a string");
    out = v.get<std::string>();
  }
  void numbers(const char* key, std::vector<double>& out) {
    if (!has(key)) return;
    out.clear();
    for (const auto& v : array(key)) out.push_back(to_number(v, at(key)));
  }
  void counts(const char* key, std::vector<std::size_t>& out) {
    if (!has(key)) return;
    out.clear();
    for (const auto& v : array(key)) out.push_back(to_count(v, at(key)));
  }
  void u64s(const char* key, std::vector<std::uint64_t>& out) {
    if (!has(key)) return;
    out.clear();
    for (const auto& v : array(key)) out.push_back(to_count(v, at(key)));
  }
  void strings(const char* key, std::vector<std::string>& out) {
    if (!has(key)) return;
    out.clear();
    for (const auto& v : array(key)) {
      if (!v.is_string()) invalid(at(key), "expected strings");
      out.push_back(v.get<std::string>());
    }
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.contains(key)) invalid(at(key), "unknown key");
    }
  }

 private:
  const json& array(const char* key) {
    const auto& v = raw(key);
    if (!v.is_array()) invalid(at(key), "expected an array");
    return v;
  }
  static std::uint64_t to_count(const json& v, const std::string& path) {
    if (!v.is_number_unsigned()) {
      invalid(path, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }
  static double to_number(const json& v, const std::string& path) {
    if (!v.is_number()) invalid(path, "expected a number");
    return v.get<double>();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_hyper(ObjectReader& r, TrainHyper& h) {
  r.number("lr", h.lr);
  r.count("epochs", h.epochs);
  r.number("weight_decay", h.weight_decay);
  r.number("label_smoothing", h.label_smoothing);
  r.count("batch", h.batch);
  r.number("momentum", h.momentum);
  r.number("input_jitter", h.input_jitter);
  r.u64("seed", h.seed);
}

template <typename F>
auto stage(const std::string& name, std::uint64_t seed, F&& body)
    -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(ErrorCode::kExperimentStage,
                "stage '" + name + "' failed for seed " +
                    std::to_string(seed) + ": " + e.what(),
                name);
  }
}

double zero_fraction(const TaskVector& tau) {
  std::size_t zeros = 0;
  std::size_t total = 0;
  for (const auto& [_, t] : tau.delta) {
    for (double v : t.values()) zeros += v == 0.0;
    total += t.size();
  }
  return total == 0 ? 0.0
                    : static_cast<double>(zeros) / static_cast<double>(total);
}

bool known_method(const std::string& name) {
  return std::find_if(std::begin(kAllMethods), std::end(kAllMethods),
                      [&](const char* m) { return name == m; }) !=
         std::end(kAllMethods);
}

std::optional<MergeSpec> merge_spec_for(const std::string& method,
                                        const ExperimentConfig& cfg) {
  MergeSpec spec;
  spec.consensus_threshold = cfg.consensus_threshold;
  spec.ties_trim_fraction = cfg.ties_trim_fraction;
  if (method == "negmerge") {
    spec.method = MergeMethod::kNegMerge;
    spec.reduce = ReduceOp::kAvg;
  } else if (method == "negmerge_min") {
    spec.method = MergeMethod::kNegMerge;
    spec.reduce = ReduceOp::kMinMag;
  } else if (method == "negmerge_max") {
    spec.method = MergeMethod::kNegMerge;
    spec.reduce = ReduceOp::kMaxMag;
  } else if (method == "conflict") {
    spec.method = MergeMethod::kConflict;
  } else if (method == "uniform") {
    spec.method = MergeMethod::kUniform;
  } else if (method == "ties") {
    spec.method = MergeMethod::kTies;
  } else if (method == "magmax") {
    spec.method = MergeMethod::kMagMax;
  } else {
    return std::nullopt;
  }
  return spec;
}

// Context shared by every method of one seed.
struct SeedContext {
  const ExperimentConfig& cfg;
  const MlpConfig& model;
  const Dataset& ds;
  const TensorMap& base;
  const EvalReport& retrain;
  const Exec& exec;
  LabeledData val;
  LabeledData forget;

  RetainForget metrics(const TensorMap& m) const {
    return {accuracy(model, m, val), accuracy(model, m, forget)};
  }

  LambdaSweep sweep(const TaskVector& tau) const {
    auto eval = [this](const TensorMap& m) { return metrics(m); };
    if (!cfg.forced_lambda) {
      return sweep_lambda(base, tau, cfg.lambda_grid, eval, cfg.retain_floor,
                          exec);
    }
    LambdaSweep s;
    s.retain_floor_ratio = cfg.retain_floor;
    const auto baseline = eval(base);
    s.baseline_retain = baseline.retain;
    s.baseline_forget = baseline.forget;
    const double lambda = *cfg.forced_lambda;
    const auto at = eval(apply(base, tau, {lambda, Direction::kNegate}, exec));
    s.points.push_back({lambda, at.retain, at.forget, true});
    s.selected_lambda = lambda;
    s.selected_index = 0;
    return s;
  }

  EvalReport final_report(const TaskVector& tau, double lambda) const {
    const auto edited = apply(base, tau, {lambda, Direction::kNegate}, exec);
    EvalReport r = evaluate_full(edited, ds, model);
    r.avg_gap = avg_gap(r, retrain);
    return r;
  }
};

}  // namespace

void FinetuneGrid::validate() const {
  auto nonempty = [](bool empty, const char* field) {
    if (empty) invalid(std::string("finetune.") + field, "must not be empty");
  };
  nonempty(learning_rates.empty(), "learning_rates");
  nonempty(epochs.empty(), "epochs");
  nonempty(weight_decays.empty(), "weight_decays");
  nonempty(label_smoothings.empty(), "label_smoothings");
  nonempty(input_jitters.empty(), "input_jitters");
  nonempty(seeds.empty(), "seeds");
  if (pool_size == 0) invalid("finetune.pool_size", "must be positive");
  if (enforce_pool_range && (pool_size < 5 || pool_size > 30)) {
    invalid("finetune.pool_size",
            "must lie in [5, 30] unless enforce_pool_range is false");
  }
  const std::size_t product = learning_rates.size() * epochs.size() *
                              weight_decays.size() * label_smoothings.size() *
                              input_jitters.size() * seeds.size();
  if (enforce_pool_range && product < pool_size) {
    invalid("finetune",
            "grid yields " + std::to_string(product) +
                " configurations, fewer than pool_size");
  }
}

std::vector<TrainHyper> FinetuneGrid::enumerate() const {
  validate();
  std::vector<TrainHyper> out;
  for (double lr : learning_rates) {
    for (std::size_t ep : epochs) {
      for (double wd : weight_decays) {
        for (double ls : label_smoothings) {
          for (double jit : input_jitters) {
            for (std::uint64_t s : seeds) {
              if (out.size() == pool_size) return out;
              TrainHyper h;
              h.lr = lr;
              h.epochs = ep;
              h.weight_decay = wd;
              h.label_smoothing = ls;
              h.input_jitter = jit;
              h.seed = s;
              h.batch = batch;
              h.momentum = momentum;
              h.validate();
              out.push_back(h);
            }
          }
        }
      }
    }
  }
  return out;
}

std::vector<TensorMap> finetune_pool(const TensorMap& base,
                                     const LabeledData& forget_data,
                                     const FinetuneGrid& grid,
                                     const MlpConfig& cfg, const Exec& exec) {
  const auto configs = grid.enumerate();
  std::vector<TensorMap> pool(configs.size());
  parallel_for(configs.size(), exec.threads, [&](std::size_t i) {
    try {
      pool[i] = train(cfg, forget_data, configs[i], base);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTrainingDiverged) throw;
      throw Error(ErrorCode::kTrainingDiverged,
                  std::string(e.what()) + " (pool member " +
                      std::to_string(i) + ", configuration " +
                      to_json(configs[i]).dump() + ")",
                  "finetune[" + std::to_string(i) + "]");
    }
  });
  return pool;
}

MlpConfig ExperimentConfig::model() const {
  MlpConfig m;
  m.input_dim = dim;
  m.hidden = hidden;
  m.n_classes = n_classes;
  m.dtype = dtype;
  return m;
}

void ExperimentConfig::validate() const {
  if (n_classes < 2) invalid("dataset.n_classes", "needs at least 2 classes");
  if (dim == 0) invalid("dataset.dim", "must be positive");
  if (samples_per_class == 0) {
    invalid("dataset.samples_per_class", "must be positive");
  }
  if (!(std::isfinite(separation) && separation >= 0.0)) {
    invalid("dataset.separation", "must be finite and non-negative");
  }
  if (forget.kind == ForgetMode::Kind::kRandomFraction &&
      !(forget.fraction > 0.0 && forget.fraction < 1.0)) {
    invalid("forget.fraction", "must lie in (0, 1)");
  }
  if (forget.kind == ForgetMode::Kind::kClassWise &&
      (forget.cls < 0 || static_cast<std::size_t>(forget.cls) >= n_classes)) {
    invalid("forget.class", "is not a valid class");
  }
  model().validate();
  base_training.validate();
  finetune.validate();
  if (methods.empty()) invalid("methods", "must not be empty");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (!known_method(m)) invalid("methods", "unknown method '" + m + "'");
    if (!seen.insert(m).second) {
      invalid("methods", "method '" + m + "' listed twice");
    }
  }
  MergeSpec spec;
  spec.consensus_threshold = consensus_threshold;
  spec.ties_trim_fraction = ties_trim_fraction;
  spec.validate();
  if (lambda_grid.empty()) invalid("lambda_grid", "must not be empty");
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(std::isfinite(lambda_grid[i]) && lambda_grid[i] >= 0.0)) {
      invalid("lambda_grid", "values must be finite and non-negative");
    }
    if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1])) {
      invalid("lambda_grid", "must be strictly increasing");
    }
  }
  if (!(retain_floor >= 0.0 && retain_floor <= 1.0)) {
    invalid("retain_floor", "must lie in [0, 1]");
  }
  if (forced_lambda &&
      !(std::isfinite(*forced_lambda) && *forced_lambda >= 0.0)) {
    invalid("forced_lambda", "must be finite and non-negative");
  }
  if (seeds.empty()) invalid("seeds", "must not be empty");
}

std::vector<double> toy_lambda_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 100; ++k) grid.push_back(k / 20.0);
  return grid;
}

ExperimentConfig toy_config() {
  ExperimentConfig cfg;
  cfg.separation = 3.5;
  cfg.base_training.lr = 0.05;
  cfg.base_training.epochs = 30;
  cfg.base_training.batch = 32;
  cfg.base_training.momentum = 0.9;
  cfg.finetune.learning_rates = {0.05, 0.1};
  cfg.finetune.epochs = {10};
  cfg.finetune.weight_decays = {0.01, 0.1};
  cfg.finetune.label_smoothings = {0.0, 0.1};
  cfg.finetune.input_jitters = {0.0, 0.5};
  cfg.finetune.seeds = {0};
  cfg.finetune.pool_size = 10;
  cfg.methods.assign(std::begin(kAllMethods), std::end(kAllMethods));
  cfg.lambda_grid = toy_lambda_grid();
  cfg.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  return cfg;
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  json forget;
  if (cfg.forget.kind == ForgetMode::Kind::kRandomFraction) {
    forget = {{"mode", "random"}, {"fraction", cfg.forget.fraction}};
  } else {
    forget = {{"mode", "class"}, {"class", cfg.forget.cls}};
  }
  json base = to_json(cfg.base_training);
  const auto& g = cfg.finetune;
  return {
      {"dataset",
       {{"n_classes", cfg.n_classes},
        {"dim", cfg.dim},
        {"samples_per_class", cfg.samples_per_class},
        {"separation", cfg.separation}}},
      {"forget", forget},
      {"model",
       {{"hidden", cfg.hidden}, {"dtype", std::string(dtype_name(cfg.dtype))}}},
      {"base_training", base},
      {"finetune",
       {{"learning_rates", g.learning_rates},
        {"epochs", g.epochs},
        {"weight_decays", g.weight_decays},
        {"label_smoothings", g.label_smoothings},
        {"input_jitters", g.input_jitters},
        {"seeds", g.seeds},
        {"pool_size", g.pool_size},
        {"enforce_pool_range", g.enforce_pool_range},
        {"batch", g.batch},
        {"momentum", g.momentum}}},
      {"methods", cfg.methods},
      {"merge",
       {{"q", cfg.consensus_threshold},
        {"ties_trim_fraction", cfg.ties_trim_fraction}}},
      {"lambda_grid", cfg.lambda_grid},
      {"retain_floor", cfg.retain_floor},
      {"forced_lambda", cfg.forced_lambda ? json(*cfg.forced_lambda) : json()},
      {"seeds", cfg.seeds}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg = toy_config();
  ObjectReader root(j, "config");
  if (root.has("dataset")) {
    ObjectReader r(root.raw("dataset"), "dataset");
    r.count("n_classes", cfg.n_classes);
    r.count("dim", cfg.dim);
    r.count("samples_per_class", cfg.samples_per_class);
    r.number("separation", cfg.separation);
    r.finish();
  }
  if (root.has("forget")) {
    ObjectReader r(root.raw("forget"), "forget");
    std::string mode = "random";
    r.string("mode", mode);
    if (mode == "random") {
      double p = cfg.forget.fraction;
      r.number("fraction", p);
      cfg.forget = ForgetMode::random_fraction(p);
    } else if (mode == "class") {
      std::uint64_t c = 0;
      r.u64("class", c);
      if (c > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
        invalid("forget.class", "is not a valid class");
      }
      cfg.forget = ForgetMode::class_wise(static_cast<int>(c));
    } else {
      invalid("forget.mode", "expected \"random\" or \"class\"");
    }
    r.finish();
  }
  if (root.has("model")) {
    ObjectReader r(root.raw("model"), "model");
    r.counts("hidden", cfg.hidden);
    std::string dtype(dtype_name(cfg.dtype));
    r.string("dtype", dtype);
    const auto parsed = parse_dtype(dtype);
    if (!parsed) invalid("model.dtype", "unknown dtype '" + dtype + "'");
    cfg.dtype = *parsed;
    r.finish();
  }
  if (root.has("base_training")) {
    ObjectReader r(root.raw("base_training"), "base_training");
    read_hyper(r, cfg.base_training);
    r.finish();
  }
  if (root.has("finetune")) {
    ObjectReader r(root.raw("finetune"), "finetune");
    auto& g = cfg.finetune;
    r.numbers("learning_rates", g.learning_rates);
    r.counts("epochs", g.epochs);
    r.numbers("weight_decays", g.weight_decays);
    r.numbers("label_smoothings", g.label_smoothings);
    r.numbers("input_jitters", g.input_jitters);
    r.u64s("seeds", g.seeds);
    r.count("pool_size", g.pool_size);
    r.boolean("enforce_pool_range", g.enforce_pool_range);
    r.count("batch", g.batch);
    r.number("momentum", g.momentum);
    r.finish();
  }
  root.strings("methods", cfg.methods);
  if (root.has("merge")) {
    ObjectReader r(root.raw("merge"), "merge");
    r.number("q", cfg.consensus_threshold);
    r.number("ties_trim_fraction", cfg.ties_trim_fraction);
    r.finish();
  }
  root.numbers("lambda_grid", cfg.lambda_grid);
  root.number("retain_floor", cfg.retain_floor);
  if (root.has("forced_lambda")) {
    const auto& v = root.raw("forced_lambda");
    if (!v.is_null()) {
      if (!v.is_number()) invalid("config.forced_lambda", "expected a number");
      cfg.forced_lambda = v.get<double>();
    }
  }
  root.u64s("seeds", cfg.seeds);
  root.finish();
  cfg.validate();
  return cfg;
}

const MethodResult& SeedReport::method(std::string_view name) const {
  for (const auto& m : methods) {
    if (m.method == name) return m;
  }
  throw Error(ErrorCode::kInvalidConfig,
              "no result for method '" + std::string(name) + "'");
}

RetainForget sweep_metrics(const TensorMap& model, const Dataset& ds,
                           const MlpConfig& cfg) {
  return {accuracy(cfg, model, subset(ds, ds.val)),
          accuracy(cfg, model, subset(ds, ds.forget))};
}

ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const RunOptions& options) {
  stage("config", 0, [&] { cfg.validate(); });
  const MlpConfig model = cfg.model();
  ExperimentReport report;
  report.config = cfg;

  for (const std::uint64_t seed : cfg.seeds) {
    SeedReport sr;
    sr.seed = seed;

    const Dataset ds = stage("dataset", seed, [&] {
      auto d = gen_dataset(cfg.n_classes, cfg.dim, cfg.samples_per_class,
                           cfg.separation, derive_seed(seed, 1));
      return split_forget(d, cfg.forget, derive_seed(seed, 2));
    });

    TrainHyper base_hyper = cfg.base_training;
    base_hyper.seed = derive_seed(seed, 3) ^ cfg.base_training.seed;
    const TensorMap base = stage("base_training", seed, [&] {
      return train(model, subset(ds, ds.train), base_hyper);
    });
    const TensorMap retrain = stage("retrain", seed, [&] {
      return train(model, subset(ds, ds.retain), base_hyper);
    });
    stage("evaluate:reference", seed, [&] {
      sr.retrain = evaluate_full(retrain, ds, model);
      sr.retrain.avg_gap = 0.0;
      sr.original = evaluate_full(base, ds, model);
      sr.original.avg_gap = avg_gap(sr.original, sr.retrain);
    });

    FinetuneGrid grid = cfg.finetune;
    for (auto& s : grid.seeds) s = derive_seed(seed, 1000 + s);
    const std::vector<TensorMap> members = stage("finetune_pool", seed, [&] {
      return finetune_pool(base, subset(ds, ds.forget), grid, model,
                           options.exec);
    });
    const std::vector<TaskVector> pool = stage("task_vectors", seed, [&] {
      std::vector<TaskVector> taus;
      for (const auto& m : members) taus.push_back(diff(m, base, options.exec));
      return taus;
    });
    sr.pool_size = pool.size();

    SeedContext ctx{cfg,
                    model,
                    ds,
                    base,
                    sr.retrain,
                    options.exec,
                    subset(ds, ds.val),
                    subset(ds, ds.forget)};
    std::map<std::string, TaskVector> merged;

    for (const auto& name : cfg.methods) {
      MethodResult mr;
      mr.method = name;
      TaskVector tau;
      if (auto spec = merge_spec_for(name, cfg)) {
        tau = stage("merge:" + name, seed,
                    [&] { return merge(pool, *spec, options.exec); });
        mr.sweep = stage("sweep:" + name, seed, [&] { return ctx.sweep(tau); });
      } else if (name == "single_best") {
        stage("sweep:" + name, seed, [&] {
          std::optional<std::size_t> best;
          for (std::size_t k = 0; k < pool.size(); ++k) {
            LambdaSweep s;
            try {
              s = ctx.sweep(pool[k]);
            } catch (const Error& e) {
              if (e.code() == ErrorCode::kNoFeasibleLambda) continue;
              throw;
            }
            if (!best || s.selected().forget < mr.sweep.selected().forget) {
              best = k;
              mr.sweep = std::move(s);
            }
          }
          if (!best) {
            throw Error(ErrorCode::kNoFeasibleLambda,
                        "no pool member has a feasible lambda");
          }
          mr.member = best;
          tau = pool[*best];
        });
      } else {
        stage("merge:" + name, seed, [&] {
          const auto retain_data = subset(ds, ds.retain);
          auto loss = [&](const TensorMap& m) {
            const auto l = sample_losses(model, m, retain_data);
            double s = 0.0;
            for (double v : l) s += v;
            return s / static_cast<double>(l.size());
          };
          auto soup = greedy_soup(members, base, loss);
          mr.accepted = soup.accepted;
          tau = std::move(soup.tau);
        });
        mr.sweep = stage("sweep:" + name, seed, [&] { return ctx.sweep(tau); });
      }
      mr.lambda = mr.sweep.selected_lambda;
      mr.zero_fraction = zero_fraction(tau);
      mr.report = stage("evaluate:" + name, seed,
                        [&] { return ctx.final_report(tau, mr.lambda); });
      if (options.keep_artifacts) merged.emplace(name, tau);
      sr.methods.push_back(std::move(mr));
    }

    if (options.keep_artifacts) {
      sr.artifacts = SeedArtifacts{ds, base, retrain, pool, std::move(merged)};
    }
    report.seeds.push_back(std::move(sr));
  }
  return report;
}

nlohmann::json to_json(const SeedReport& report) {
  json methods = json::array();
  for (const auto& m : report.methods) {
    json entry = {{"method", m.method},
                  {"lambda", m.lambda},
                  {"report", to_json(m.report)},
                  {"zero_fraction", m.zero_fraction},
                  {"sweep", to_json(m.sweep)}};
    if (m.member) entry["member"] = *m.member;
    if (m.method == "greedy") entry["accepted"] = m.accepted;
    methods.push_back(std::move(entry));
  }
  return {{"seed", report.seed},
          {"original", to_json(report.original)},
          {"retrain", to_json(report.retrain)},
          {"pool_size", report.pool_size},
          {"methods", std::move(methods)}};
}

nlohmann::json to_json(const ExperimentReport& report) {
  json seeds = json::array();
  for (const auto& s : report.seeds) seeds.push_back(to_json(s));
  return {{"config", to_json(report.config)}, {"seeds", std::move(seeds)}};
}

std::string to_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "seed,method,acc_Dr,acc_Df,acc_Dtest,mia,avg_gap,lambda\n";
  auto row = [&](std::uint64_t seed, const std::string& method,
                 const EvalReport& r, const std::string& lambda) {
    out << seed << ',' << method << ',' << format_double(r.acc_retain) << ','
        << format_double(r.acc_forget) << ',' << format_double(r.acc_test)
        << ',' << format_double(r.mia_efficacy) << ','
        << format_double(r.avg_gap.value_or(0.0)) << ',' << lambda << '\n';
  };
  for (const auto& s : report.seeds) {
    row(s.seed, "retrain", s.retrain, "");
    for (const auto& m : s.methods) {
      row(s.seed, m.method, m.report, format_double(m.lambda));
    }
  }
  return out.str();
}

}  // namespace negmerge
