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

#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "negmerge/analysis.hpp"
#include "negmerge/consensus_stream.hpp"
#include "negmerge/error.hpp"
#include "negmerge/experiment.hpp"
#include "negmerge/merging.hpp"
#include "negmerge/parallel.hpp"
#include "negmerge/task_vector.hpp"
#include "negmerge/tensor_store.hpp"

namespace negmerge::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Globals {
  std::string format = "json";
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;

  Exec exec() const { return Exec{threads}; }
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo:
    case ErrorCode::kMalformedHeader:
    case ErrorCode::kHeaderTooLarge:
    case ErrorCode::kOffsetOutOfBounds:
    case ErrorCode::kOverlappingData:
    case ErrorCode::kUnknownDtype:
    case ErrorCode::kDuplicateName:
    case ErrorCode::kNonFiniteValue:
    case ErrorCode::kIndexOutOfRange:
      return kIoError;
    case ErrorCode::kSchemaMismatch:
      return kSchemaError;
    case ErrorCode::kExperimentStage:
      return kStageError;
    default:
      return kConfigError;
  }
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'", path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "cannot read '" + path + "'", path);
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'",
                path.string());
  }
}

json read_json(const std::string& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidConfig,
                "invalid JSON in '" + path + "': " + e.what(), path);
  }
}

// Single-row CSV of a flat JSON object, keys in object order.
std::string flat_csv(const json& record) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [key, _] : record.items()) {
    out << (first ? "" : ",") << key;
    first = false;
  }
  out << '\n';
  first = true;
  for (const auto& [_, value] : record.items()) {
    out << (first ? "" : ",");
    first = false;
    if (value.is_string()) {
      out << value.get<std::string>();
    } else if (value.is_number_float()) {
      out << format_double(value.get<double>());
    } else {
      out << value.dump();
    }
  }
  out << '\n';
  return out.str();
}

void emit(const Globals& g, const json& record, std::ostream& out) {
  if (g.format == "csv") {
    out << flat_csv(record);
  } else {
    out << record.dump() << '\n';
  }
}

double zero_fraction(const TaskVector& tau) {
  std::size_t zeros = 0;
  for (const auto& [_, t] : tau.delta) {
    for (double v : t.values()) zeros += v == 0.0;
  }
  const std::size_t total = tau.delta.element_count();
  return total == 0 ? 0.0
                    : static_cast<double>(zeros) / static_cast<double>(total);
}

// ---- diff ------------------------------------------------------------------

struct DiffArgs {
  std::string base;
  std::string finetuned;
  std::string out;
};

int cmd_diff(const Globals& g, const DiffArgs& a, std::ostream& out) {
  const TensorMap base = load(a.base);
  const TensorMap ft = load(a.finetuned);
  const TaskVector tau = diff(ft, base, g.exec());
  save_task_vector(tau, a.out);
  emit(g,
       {{"command", "diff"},
        {"out", a.out},
        {"elements", tau.delta.element_count()},
        {"zero_fraction", zero_fraction(tau)}},
       out);
  return kOk;
}

// ---- merge -----------------------------------------------------------------

struct MergeArgs {
  std::vector<std::string> pool;
  std::string base;
  std::string method = "negmerge";
  std::string reduce = "avg";
  double q = 1.0;
  double ties_k = 0.2;
  std::string spec;
  bool streaming = false;
  std::string state_out;
  std::string resume;
  bool sparse_out = false;
  std::string out;
  bool timing = false;
};

MergeSpec resolve_spec(const MergeArgs& a, const CLI::App& sub) {
  MergeSpec spec;
  if (!a.spec.empty()) spec = merge_spec_from_json(read_json(a.spec));
  if (a.spec.empty() || sub.count("--method") > 0) {
    const auto m = parse_merge_method(a.method);
    if (!m) {
      throw Error(ErrorCode::kInvalidConfig,
                  "unknown merge method '" + a.method + "'", "method");
    }
    spec.method = *m;
  }
  if (a.spec.empty() || sub.count("--reduce") > 0) {
    const auto r = parse_reduce_op(a.reduce);
    if (!r) {
      throw Error(ErrorCode::kInvalidConfig,
                  "unknown reduce operator '" + a.reduce + "'", "reduce");
    }
    spec.reduce = *r;
  }
  if (a.spec.empty() || sub.count("--q") > 0) spec.consensus_threshold = a.q;
  if (a.spec.empty() || sub.count("--ties-k") > 0) {
    spec.ties_trim_fraction = a.ties_k;
  }
  spec.validate();
  return spec;
}

TaskVector load_member(const std::string& path,
                       const std::optional<TensorMap>& base, const Exec& exec) {
  if (base) return diff(load(path), *base, exec);
  return load_task_vector(path);
}

int cmd_merge(const Globals& g, const MergeArgs& a, const CLI::App& sub,
              std::ostream& out) {
  const MergeSpec spec = resolve_spec(a, sub);
  std::optional<TensorMap> base;
  if (!a.base.empty()) base = load(a.base);
  const bool stateful = !a.state_out.empty() || !a.resume.empty();
  if ((a.streaming || stateful) && spec.method != MergeMethod::kNegMerge) {
    throw Error(ErrorCode::kInvalidConfig,
                "streaming is only available for the negmerge method",
                "streaming");
  }
  if ((a.streaming || stateful) && spec.consensus_threshold != 1.0) {
    throw Error(ErrorCode::kInvalidConfig,
                "streaming requires unanimous consensus (q = 1)", "q");
  }

  using Clock = std::chrono::steady_clock;
  Clock::duration merge_time{};
  TaskVector tau;
  std::size_t pool_size = 0;
  if (a.streaming || stateful) {
    std::optional<SignConsensusState> state;
    if (!a.resume.empty()) state = SignConsensusState::load(a.resume);
    for (const auto& path : a.pool) {
      const TaskVector member = load_member(path, base, g.exec());
      if (!state) state.emplace(member.schema());
      const auto t0 = Clock::now();
      state->update(member, g.exec());
      merge_time += Clock::now() - t0;
    }
    const auto t0 = Clock::now();
    tau = state->finalize(spec.reduce);
    merge_time += Clock::now() - t0;
    pool_size = state->count();
    if (!a.state_out.empty()) state->save(a.state_out);
  } else {
    std::vector<TaskVector> pool;
    pool.reserve(a.pool.size());
    for (const auto& path : a.pool) {
      pool.push_back(load_member(path, base, g.exec()));
    }
    const auto t0 = Clock::now();
    tau = merge(pool, spec, g.exec());
    merge_time = Clock::now() - t0;
    pool_size = pool.size();
  }

  if (a.sparse_out) {
    save_sparse(sparsify(tau), a.out);
  } else {
    save_task_vector(tau, a.out);
  }

  json record = {{"command", "merge"},
                 {"method", std::string(to_string(spec.method))},
                 {"reduce", std::string(to_string(spec.reduce))},
                 {"pool_size", pool_size},
                 {"streaming", a.streaming || stateful},
                 {"sparse", a.sparse_out},
                 {"out", a.out},
                 {"zero_fraction", zero_fraction(tau)}};
  if (a.timing) {
    record["merge_seconds"] =
        std::chrono::duration<double>(merge_time).count();
  }
  emit(g, record, out);
  return kOk;
}

// ---- apply -----------------------------------------------------------------

struct ApplyArgs {
  std::string base;
  std::string tau;
  double lambda = 1.0;
  bool negate = false;
  std::string out;
};

int cmd_apply(const Globals& g, const ApplyArgs& a, std::ostream& out) {
  const NegationConfig cfg{a.lambda,
                           a.negate ? Direction::kNegate : Direction::kAdd};
  cfg.validate();
  const TensorMap base = load(a.base);
  const TensorMap tau_file = load(a.tau);
  const bool sparse = is_sparse(tau_file);
  const TensorMap result =
      sparse ? apply_sparse(base, decode_sparse(tau_file), cfg)
             : apply(base, TaskVector{tau_file, ""}, cfg, g.exec());
  save(result, a.out);
  emit(g,
       {{"command", "apply"},
        {"lambda", a.lambda},
        {"negate", a.negate},
        {"sparse_tau", sparse},
        {"out", a.out}},
       out);
  return kOk;
}

// ---- stats -----------------------------------------------------------------

struct StatsArgs {
  std::string tau;
  std::vector<std::string> pool;
  std::string group_mode = "depth";
  std::size_t depth_groups = 3;
  std::string pattern = "^([^.]+)";
  std::vector<std::string> groups;
  std::string out;
};

GroupingRule make_grouping(const StatsArgs& a, const Schema& schema) {
  if (a.group_mode == "depth") return depth_groups(schema, a.depth_groups);
  if (a.group_mode == "prefix") return GroupingRule::by_name_regex(a.pattern);
  std::vector<std::pair<std::string, std::string>> groups;
  for (const auto& spec : a.groups) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorCode::kInvalidConfig,
                  "group '" + spec + "' is not of the form label=regex",
                  "group");
    }
    groups.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
  }
  if (groups.empty()) {
    throw Error(ErrorCode::kInvalidConfig,
                "custom grouping needs at least one --group", "group");
  }
  return GroupingRule::custom(std::move(groups));
}

int cmd_stats(const Globals& g, const StatsArgs& a, std::ostream& out) {
  const TaskVector tau = load_task_vector(a.tau);
  std::vector<TaskVector> pool;
  for (const auto& path : a.pool) pool.push_back(load_task_vector(path));
  const GroupingRule grouping = make_grouping(a, tau.schema());
  const SparsityReport report =
      pool.empty() ? sparsity_report(tau, grouping)
                   : sparsity_report(tau, grouping, Pool(pool));
  const std::string text =
      g.format == "csv" ? to_csv(report) : to_json(report).dump() + "\n";
  if (!a.out.empty()) write_text(a.out, text);
  out << text;
  return kOk;
}

// ---- experiment ------------------------------------------------------------

struct ExperimentArgs {
  std::string config;
  std::string out;
};

int cmd_experiment(const Globals& g, const ExperimentArgs& a,
                   std::ostream& out) {
  ExperimentConfig cfg = experiment_config_from_json(read_json(a.config));
  if (g.seed) cfg.seeds = {*g.seed};

  const fs::path dir(a.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::kIo,
                "cannot create '" + a.out + "': " + ec.message(), a.out);
  }

  RunOptions options;
  options.exec = g.exec();
  const ExperimentReport report = run_experiment(cfg, options);

  for (const auto& s : report.seeds) {
    write_text(dir / ("seed_" + std::to_string(s.seed) + ".json"),
               to_json(s).dump(2) + "\n");
  }
  const std::string csv = to_csv(report);
  write_text(dir / "report.csv", csv);
  write_text(dir / "report.json", to_json(report).dump(2) + "\n");

  if (g.format == "csv") {
    out << csv;
  } else {
    json seeds = json::array();
    for (const auto& s : report.seeds) seeds.push_back(s.seed);
    out << json{{"command", "experiment"},
                {"out", a.out},
                {"seeds", seeds},
                {"csv", (dir / "report.csv").string()}}
               .dump()
        << '\n';
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Task-vector merging and negation toolkit", "negmerge"};
  app.require_subcommand(1, 1);
  app.allow_extras(false);

  Globals g;
  g.threads = default_threads();
  std::uint64_t seed = 0;
  app.add_option("--output-format", g.format, "Report format")
      ->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--threads", g.threads, "Worker threads")
      ->check(CLI::PositiveNumber);
  auto* seed_opt =
      app.add_option("--seed", seed, "Override the experiment seeds");

  DiffArgs diff_args;
  auto* diff_cmd = app.add_subcommand("diff", "Task vector of a fine-tune");
  diff_cmd->add_option("--base", diff_args.base)->required();
  diff_cmd->add_option("--finetuned", diff_args.finetuned)->required();
  diff_cmd->add_option("--out", diff_args.out)->required();

  MergeArgs merge_args;
  auto* merge_cmd = app.add_subcommand("merge", "Merge a pool of task vectors");
  merge_cmd->add_option("--pool", merge_args.pool, "Task vector files")
      ->required()
      ->expected(1, -1);
  merge_cmd->add_option("--base", merge_args.base,
                        "Treat pool files as models fine-tuned from this base");
  merge_cmd->add_option("--method", merge_args.method);
  merge_cmd->add_option("--reduce", merge_args.reduce);
  merge_cmd->add_option("--q", merge_args.q, "Consensus threshold");
  merge_cmd->add_option("--ties-k", merge_args.ties_k, "TIES trim fraction");
  merge_cmd->add_option("--spec", merge_args.spec, "Merge spec JSON file");
  merge_cmd->add_flag("--streaming", merge_args.streaming);
  merge_cmd->add_option("--state-out", merge_args.state_out);
  merge_cmd->add_option("--resume", merge_args.resume);
  merge_cmd->add_flag("--sparse-out", merge_args.sparse_out);
  merge_cmd->add_option("--out", merge_args.out)->required();
  merge_cmd->add_flag("--timing", merge_args.timing);

  ApplyArgs apply_args;
  auto* apply_cmd = app.add_subcommand("apply", "Add or negate a task vector");
  apply_cmd->add_option("--base", apply_args.base)->required();
  apply_cmd->add_option("--tau", apply_args.tau)->required();
  apply_cmd->add_option("--lambda", apply_args.lambda);
  apply_cmd->add_flag("--negate", apply_args.negate);
  apply_cmd->add_option("--out", apply_args.out)->required();

  StatsArgs stats_args;
  auto* stats_cmd = app.add_subcommand("stats", "Sparsity report");
  stats_cmd->add_option("--tau", stats_args.tau)->required();
  stats_cmd->add_option("--pool", stats_args.pool)->expected(1, -1);
  stats_cmd->add_option("--group-mode", stats_args.group_mode)
      ->check(CLI::IsMember({"depth", "prefix", "custom"}));
  stats_cmd->add_option("--depth-groups", stats_args.depth_groups)
      ->check(CLI::PositiveNumber);
  stats_cmd->add_option("--pattern", stats_args.pattern,
                        "Regex whose first capture is the group (prefix)");
  stats_cmd->add_option("--group", stats_args.groups, "label=regex (custom)");
  stats_cmd->add_option("--out", stats_args.out);

  ExperimentArgs exp_args;
  auto* exp_cmd = app.add_subcommand("experiment", "Run an experiment config");
  exp_cmd->add_option("--config", exp_args.config)->required();
  exp_cmd->add_option("--out", exp_args.out)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "negmerge: error: " << one_line(e.what()) << '\n';
    return kConfigError;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (diff_cmd->parsed()) return cmd_diff(g, diff_args, out);
    if (merge_cmd->parsed()) return cmd_merge(g, merge_args, *merge_cmd, out);
    if (apply_cmd->parsed()) return cmd_apply(g, apply_args, out);
    if (stats_cmd->parsed()) return cmd_stats(g, stats_args, out);
    if (exp_cmd->parsed()) return cmd_experiment(g, exp_args, out);
  } catch (const SchemaMismatch& e) {
    err << "negmerge: error: schema mismatch at tensor '" << e.name()
        << "' (" << e.reason() << ")\n";
    return kSchemaError;
  } catch (const Error& e) {
    err << "negmerge: error: " << one_line(e.what()) << '\n';
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "negmerge: error: " << one_line(e.what()) << '\n';
    return kIoError;
  }
  return kConfigError;
}

}  // namespace negmerge::cli
