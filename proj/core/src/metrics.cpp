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

#include "negmerge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "negmerge/error.hpp"

namespace negmerge {
namespace {

void require_nonempty(const std::vector<std::size_t>& split,
                      const char* name) {
  if (split.empty()) {
    throw Error(ErrorCode::kEmptyPartition,
                std::string(name) + " split is empty", name);
  }
}

}  // namespace

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j = {{"acc_Df", report.acc_forget},
                      {"acc_Dr", report.acc_retain},
                      {"acc_Dtest", report.acc_test},
                      {"mia", report.mia_efficacy},
                      {"mia_degenerate", report.mia_degenerate}};
  j["avg_gap"] = report.avg_gap ? nlohmann::json(*report.avg_gap)
                                : nlohmann::json(nullptr);
  return j;
}

EvalReport evaluate(const TensorMap& model, const Dataset& ds,
                    const MlpConfig& cfg) {
  require_nonempty(ds.forget, "forget");
  require_nonempty(ds.retain, "retain");
  require_nonempty(ds.test, "test");
  EvalReport r;
  r.acc_forget = accuracy(cfg, model, subset(ds, ds.forget));
  r.acc_retain = accuracy(cfg, model, subset(ds, ds.retain));
  r.acc_test = accuracy(cfg, model, subset(ds, ds.test));
  return r;
}

MiaResult mia_from_losses(std::span<const double> member_losses,
                          std::span<const double> nonmember_losses,
                          std::span<const double> target_losses) {
  if (member_losses.empty() || nonmember_losses.empty()) {
    throw Error(ErrorCode::kEmptyPartition,
                "membership threshold needs members and non-members");
  }
  std::vector<double> members(member_losses.begin(), member_losses.end());
  std::vector<double> others(nonmember_losses.begin(), nonmember_losses.end());
  std::sort(members.begin(), members.end());
  std::sort(others.begin(), others.end());

  std::vector<double> values = members;
  values.insert(values.end(), others.begin(), others.end());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  MiaResult result;
  if (values.size() == 1) {
    result.degenerate = true;
    result.threshold = values.front();
    return result;
  }

  // Candidate thresholds: below everything, midpoints, above everything.
  std::vector<double> thresholds;
  thresholds.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    thresholds.push_back(values[i] + (values[i + 1] - values[i]) / 2.0);
  }
  thresholds.push_back(std::numeric_limits<double>::infinity());

  const double nm = static_cast<double>(members.size());
  const double no = static_cast<double>(others.size());
  double best = -1.0;
  for (double t : thresholds) {
    const auto members_kept = static_cast<double>(
        std::upper_bound(members.begin(), members.end(), t) - members.begin());
    const auto others_above = static_cast<double>(
        others.end() - std::upper_bound(others.begin(), others.end(), t));
    const double bal = 0.5 * (members_kept / nm + others_above / no);
    if (bal > best) {
      best = bal;
      result.threshold = t;
    }
  }
  result.balanced_accuracy = best;
  if (!target_losses.empty()) {
    const auto above = std::count_if(
        target_losses.begin(), target_losses.end(),
        [&](double l) { return l > result.threshold; });
    result.efficacy =
        static_cast<double>(above) / static_cast<double>(target_losses.size());
  }
  return result;
}

MiaResult mia_efficacy(const TensorMap& model, const Dataset& ds,
                       const MlpConfig& cfg) {
  require_nonempty(ds.retain, "retain");
  require_nonempty(ds.test, "test");
  const auto members = sample_losses(cfg, model, subset(ds, ds.retain));
  const auto others = sample_losses(cfg, model, subset(ds, ds.test));
  const auto targets = sample_losses(cfg, model, subset(ds, ds.forget));
  return mia_from_losses(members, others, targets);
}

EvalReport evaluate_full(const TensorMap& model, const Dataset& ds,
                         const MlpConfig& cfg) {
  EvalReport r = evaluate(model, ds, cfg);
  const MiaResult mia = mia_efficacy(model, ds, cfg);
  r.mia_efficacy = mia.efficacy;
  r.mia_degenerate = mia.degenerate;
  return r;
}

double avg_gap(const EvalReport& report, const EvalReport& reference) {
  const double sum = std::abs(report.acc_forget - reference.acc_forget) +
                     std::abs(report.acc_retain - reference.acc_retain) +
                     std::abs(report.acc_test - reference.acc_test) +
                     std::abs(report.mia_efficacy - reference.mia_efficacy);
  return sum / 4.0 * 100.0;
}

}  // namespace negmerge
