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

#include "negmerge/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

#include "negmerge/error.hpp"

namespace negmerge {
namespace {

std::regex compile(const std::string& pattern, const std::string& label) {
  try {
    return std::regex(pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw Error(ErrorCode::kInvalidConfig,
                "bad grouping pattern '" + pattern + "': " + e.what(), label);
  }
}

double fraction(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0
                    : static_cast<double>(part) / static_cast<double>(whole);
}

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) {
  return (a + b - 1) / b;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

GroupingRule GroupingRule::by_name_regex(std::string pattern) {
  compile(pattern, "pattern");
  GroupingRule rule;
  rule.mode_ = Mode::kNameRegex;
  rule.pattern_ = std::move(pattern);
  return rule;
}

GroupingRule GroupingRule::custom(
    std::vector<std::pair<std::string, std::string>> groups) {
  GroupingRule rule;
  rule.mode_ = Mode::kCustom;
  for (const auto& [label, pattern] : groups) {
    if (label.empty()) {
      throw Error(ErrorCode::kInvalidConfig, "group labels must be non-empty");
    }
    compile(pattern, label);
    if (std::find(rule.labels_.begin(), rule.labels_.end(), label) ==
        rule.labels_.end()) {
      rule.labels_.push_back(label);
    }
  }
  rule.custom_ = std::move(groups);
  return rule;
}

std::string GroupingRule::assign(std::string_view name) const {
  const std::string key(name);
  switch (mode_) {
    case Mode::kDepth: {
      auto it = assignment_.find(name);
      return it == assignment_.end() ? std::string(kOtherGroup) : it->second;
    }
    case Mode::kNameRegex: {
      std::smatch m;
      const std::regex re = compile(pattern_, "pattern");
      if (std::regex_search(key, m, re) && m.size() > 1 && m[1].matched &&
          m[1].length() > 0) {
        return m[1].str();
      }
      return std::string(kOtherGroup);
    }
    case Mode::kCustom: {
      std::string found;
      for (const auto& [label, pattern] : custom_) {
        if (!std::regex_search(key, compile(pattern, label))) continue;
        if (!found.empty() && found != label) {
          throw Error(ErrorCode::kGroupingOverlap,
                      "tensor '" + key + "' matches groups '" + found +
                          "' and '" + label + "'",
                      key);
        }
        found = label;
      }
      return found.empty() ? std::string(kOtherGroup) : found;
    }
  }
  return std::string(kOtherGroup);
}

std::optional<std::uint64_t> layer_index(std::string_view name) {
  static const std::regex re(R"((?:^|\.)(?:layers|blocks)\.(\d+)\.)");
  std::cmatch m;
  if (!std::regex_search(name.data(), name.data() + name.size(), m, re)) {
    return std::nullopt;
  }
  std::uint64_t idx = 0;
  const auto s = m[1].str();
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), idx);
  if (ec != std::errc()) return std::nullopt;
  return idx;
}

GroupingRule depth_groups(const Schema& schema, std::size_t n_groups) {
  if (n_groups == 0) {
    throw Error(ErrorCode::kInvalidConfig, "n_groups must be positive");
  }
  std::map<std::string, std::uint64_t> indices;
  std::uint64_t layers = 0;
  for (const auto& [name, _] : schema) {
    if (auto idx = layer_index(name)) {
      indices.emplace(name, *idx);
      layers = std::max(layers, *idx + 1);
    }
  }
  if (indices.empty()) {
    throw Error(ErrorCode::kNoLayerIndices,
                "no tensor name carries a layers.<k>. or blocks.<k>. index");
  }

  GroupingRule rule;
  rule.mode_ = GroupingRule::Mode::kDepth;
  static const char* kThirds[] = {"shallow", "middle", "deep"};
  for (std::size_t g = 0; g < n_groups; ++g) {
    rule.labels_.push_back(n_groups == 3 ? std::string(kThirds[g])
                                         : "depth_" + std::to_string(g));
    const std::uint64_t lo = ceil_div(g * layers, n_groups);
    const std::uint64_t hi_excl = ceil_div((g + 1) * layers, n_groups);
    if (lo < hi_excl) rule.ranges_[rule.labels_.back()] = {lo, hi_excl - 1};
  }
  for (const auto& [name, idx] : indices) {
    rule.assignment_.emplace(name, rule.labels_[idx * n_groups / layers]);
  }
  return rule;
}

SparsityReport sparsity_report(const TaskVector& tau,
                               const GroupingRule& grouping,
                               std::optional<Pool> pool) {
  if (pool) {
    for (const auto& member : *pool) {
      check_compatible(member.schema(), tau.schema());
    }
  }

  SparsityReport report;
  std::map<std::string, GroupSparsity> groups;
  std::size_t frozen = 0;
  for (const auto& [name, t] : tau.delta) {
    TensorSparsity ts{name, grouping.assign(name), t.size(), 0};
    const auto values = t.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] != 0.0) continue;
      ++ts.zeros;
      if (pool) {
        bool all_zero = true;
        for (const auto& member : *pool) {
          if (member.delta.at(name)[i] != 0.0) {
            all_zero = false;
            break;
          }
        }
        frozen += all_zero;
      }
    }
    auto& g = groups[ts.group];
    g.label = ts.group;
    g.elements += ts.elements;
    g.zeros += ts.zeros;
    report.total_elements += ts.elements;
    report.zero_elements += ts.zeros;
    report.per_tensor.push_back(std::move(ts));
  }
  report.zero_fraction = fraction(report.zero_elements, report.total_elements);
  if (pool) {
    report.frozen_zero_elements = frozen;
    report.masked_zero_elements = report.zero_elements - frozen;
  }

  auto finish = [&](GroupSparsity g) {
    g.zero_fraction = fraction(g.zeros, g.elements);
    if (auto it = grouping.ranges().find(g.label);
        it != grouping.ranges().end()) {
      g.layer_range = it->second;
    }
    report.per_group.push_back(std::move(g));
  };
  for (const auto& label : grouping.labels()) {
    auto it = groups.find(label);
    GroupSparsity g;
    g.label = label;
    if (it != groups.end()) {
      g = it->second;
      groups.erase(it);
    }
    finish(std::move(g));
  }
  // Discovered labels (regex mode) in lexicographic order, "other" last.
  std::optional<GroupSparsity> other;
  for (auto& [label, g] : groups) {
    if (label == kOtherGroup) {
      other = g;
    } else {
      finish(g);
    }
  }
  if (other) finish(*other);
  return report;
}

nlohmann::json to_json(const SparsityReport& report) {
  nlohmann::json j;
  j["total_elements"] = report.total_elements;
  j["zero_elements"] = report.zero_elements;
  j["zero_fraction"] = report.zero_fraction;
  j["frozen_zero_elements"] =
      report.frozen_zero_elements ? nlohmann::json(*report.frozen_zero_elements)
                                  : nlohmann::json(nullptr);
  j["masked_zero_elements"] =
      report.masked_zero_elements ? nlohmann::json(*report.masked_zero_elements)
                                  : nlohmann::json(nullptr);
  j["per_tensor"] = nlohmann::json::array();
  for (const auto& t : report.per_tensor) {
    j["per_tensor"].push_back({{"name", t.name},
                               {"group", t.group},
                               {"elements", t.elements},
                               {"zeros", t.zeros}});
  }
  j["per_group"] = nlohmann::json::array();
  for (const auto& g : report.per_group) {
    nlohmann::json e = {{"label", g.label},
                        {"elements", g.elements},
                        {"zeros", g.zeros},
                        {"zero_fraction", g.zero_fraction}};
    e["layer_range"] = g.layer_range
                           ? nlohmann::json::array({g.layer_range->first,
                                                    g.layer_range->second})
                           : nlohmann::json(nullptr);
    j["per_group"].push_back(std::move(e));
  }
  return j;
}

namespace {

// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string to_csv(const SparsityReport& report) {
  std::ostringstream os;
  os << "kind,name,elements,zeros,zero_fraction\n";
  os << "total,all," << report.total_elements << ',' << report.zero_elements
     << ',' << format_double(report.zero_fraction) << '\n';
  if (report.frozen_zero_elements) {
    os << "frozen,all," << report.total_elements << ','
       << *report.frozen_zero_elements << ','
       << format_double(fraction(*report.frozen_zero_elements,
                                 report.total_elements))
       << '\n';
    os << "masked,all," << report.total_elements << ','
       << *report.masked_zero_elements << ','
       << format_double(fraction(*report.masked_zero_elements,
                                 report.total_elements))
       << '\n';
  }
  for (const auto& g : report.per_group) {
    os << "group," << csv_field(g.label) << ',' << g.elements << ','
       << g.zeros << ',' << format_double(g.zero_fraction) << '\n';
  }
  for (const auto& t : report.per_tensor) {
    os << "tensor," << csv_field(t.name) << ',' << t.elements << ','
       << t.zeros << ',' << format_double(fraction(t.zeros, t.elements))
       << '\n';
  }
  return os.str();
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 20; ++k) grid.push_back(k / 20.0);
  return grid;
}

LambdaSweep sweep_lambda(const TensorMap& base, const TaskVector& tau,
                         const std::vector<double>& grid,
                         const SweepEvalFn& eval, double floor,
                         const Exec& exec) {
  if (grid.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "lambda grid is empty", "grid");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i]) || grid[i] < 0.0 ||
        (i > 0 && grid[i] <= grid[i - 1])) {
      throw Error(ErrorCode::kInvalidConfig,
                  "lambda grid must be finite, non-negative and strictly "
                  "increasing",
                  "grid");
    }
  }
  if (!std::isfinite(floor) || floor < 0.0) {
    throw Error(ErrorCode::kInvalidConfig,
                "retain floor ratio must be finite and non-negative", "floor");
  }

  LambdaSweep sweep;
  sweep.retain_floor_ratio = floor;
  const RetainForget baseline = eval(base);
  sweep.baseline_retain = baseline.retain;
  sweep.baseline_forget = baseline.forget;
  const double threshold = floor * baseline.retain;

  std::optional<std::size_t> selected;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const TensorMap model =
        apply(base, tau, NegationConfig{grid[i], Direction::kNegate}, exec);
    const RetainForget rf = eval(model);
    const bool feasible = rf.retain >= threshold;
    sweep.points.push_back({grid[i], rf.retain, rf.forget, feasible});
    if (feasible) selected = i;
  }
  if (!selected) {
    throw Error(ErrorCode::kNoFeasibleLambda,
                "no grid lambda keeps the retain metric at or above " +
                    format_double(floor) + " of the baseline");
  }
  sweep.selected_index = *selected;
  sweep.selected_lambda = grid[*selected];
  return sweep;
}

nlohmann::json to_json(const LambdaSweep& sweep) {
  nlohmann::json j;
  j["retain_floor_ratio"] = sweep.retain_floor_ratio;
  j["baseline_retain"] = sweep.baseline_retain;
  j["baseline_forget"] = sweep.baseline_forget;
  j["selected_lambda"] = sweep.selected_lambda;
  j["points"] = nlohmann::json::array();
  for (const auto& p : sweep.points) {
    j["points"].push_back({{"lambda", p.lambda},
                           {"retain", p.retain},
                           {"forget", p.forget},
                           {"feasible", p.feasible}});
  }
  return j;
}

std::string to_csv(const LambdaSweep& sweep) {
  std::ostringstream os;
  os << "lambda,retain,forget,feasible,selected\n";
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    const auto& p = sweep.points[i];
    os << format_double(p.lambda) << ',' << format_double(p.retain) << ','
       << format_double(p.forget) << ',' << (p.feasible ? 1 : 0) << ','
       << (i == sweep.selected_index ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace negmerge
