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

#include "negmerge/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "negmerge/error.hpp"

namespace negmerge {
namespace {

std::string weight_name(std::size_t k) {
  return "layers." + std::to_string(k) + ".weight";
}
std::string bias_name(std::size_t k) {
  return "layers." + std::to_string(k) + ".bias";
}

struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w;  // out x in
  std::vector<double> b;
};

struct Net {
  std::vector<Layer> layers;

  static Net shaped(const MlpConfig& cfg) {
    Net net;
    std::size_t in = cfg.input_dim;
    auto add = [&](std::size_t out) {
      net.layers.push_back({in, out, std::vector<double>(in * out, 0.0),
                            std::vector<double>(out, 0.0)});
      in = out;
    };
    for (auto h : cfg.hidden) add(h);
    add(cfg.n_classes);
    return net;
  }

  static Net from_params(const MlpConfig& cfg, const TensorMap& params) {
    check_compatible(schema_of(params), cfg.schema());
    Net net = shaped(cfg);
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
      const auto w = params.at(weight_name(k)).values();
      const auto b = params.at(bias_name(k)).values();
      net.layers[k].w.assign(w.begin(), w.end());
      net.layers[k].b.assign(b.begin(), b.end());
    }
    return net;
  }

  TensorMap to_params(DType dtype) const {
    TensorMap map;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& l = layers[k];
      map.insert(weight_name(k), Tensor(dtype, {l.out, l.in}, l.w));
      map.insert(bias_name(k), Tensor(dtype, {l.out}, l.b));
    }
    return map;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& l : layers) {
      for (double v : l.w) s += v * v;
      for (double v : l.b) s += v * v;
    }
    return s;
  }
};

// Activations for one sample: z per layer (pre-activation) and a per layer
// (post-activation; the last entry holds the logits).
struct Trace {
  std::vector<std::vector<double>> z;
  std::vector<std::vector<double>> a;
};

void forward(const Net& net, std::span<const double> x, Trace& t) {
  const std::size_t n_layers = net.layers.size();
  t.z.resize(n_layers);
  t.a.resize(n_layers);
  std::span<const double> in = x;
  for (std::size_t k = 0; k < n_layers; ++k) {
    const auto& l = net.layers[k];
    auto& z = t.z[k];
    z.assign(l.out, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double* row = l.w.data() + o * l.in;
      double s = l.b[o];
      for (std::size_t i = 0; i < l.in; ++i) s += row[i] * in[i];
      z[o] = s;
    }
    auto& a = t.a[k];
    a = z;
    if (k + 1 < n_layers) {
      for (auto& v : a) v = v > 0.0 ? v : 0.0;
    }
    in = a;
  }
}

// Log-softmax of the logits, numerically stabilized.
void log_softmax(std::span<const double> logits, std::vector<double>& out) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  const double lse = m + std::log(s);
  out.resize(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) out[c] = logits[c] - lse;
}

double smoothed_ce(std::span<const double> logp, int label, double eps) {
  const double k = static_cast<double>(logp.size());
  double loss = 0.0;
  for (std::size_t c = 0; c < logp.size(); ++c) {
    const double y = (static_cast<int>(c) == label ? 1.0 - eps : 0.0) + eps / k;
    loss -= y * logp[c];
  }
  return loss;
}

void check_labels(const MlpConfig& cfg, const LabeledData& data) {
  if (data.dim != cfg.input_dim ||
      data.features.size() != data.labels.size() * data.dim) {
    throw Error(ErrorCode::kInvalidConfig,
                "data dimension does not match the network input");
  }
  for (int y : data.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= cfg.n_classes) {
      throw Error(ErrorCode::kInvalidConfig,
                  "label " + std::to_string(y) + " out of range");
    }
  }
}

// Accumulates d(mean loss)/d(theta) over rows [begin, end) of `rows` into
// `grad` (zeroed first) and returns the mean data loss.
template <typename RowFn>
double batch_gradient(const Net& net, std::size_t count, const RowFn& row,
                      const std::vector<int>& labels, double eps, Net& grad) {
  for (auto& l : grad.layers) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
  Trace t;
  std::vector<double> logp;
  std::vector<double> dz;
  std::vector<double> da;
  const double inv = 1.0 / static_cast<double>(count);
  const double k = static_cast<double>(net.layers.back().out);
  double total = 0.0;
  for (std::size_t s = 0; s < count; ++s) {
    const auto x = row(s);
    forward(net, x, t);
    log_softmax(t.a.back(), logp);
    total += smoothed_ce(logp, labels[s], eps);

    dz.resize(logp.size());
    for (std::size_t c = 0; c < logp.size(); ++c) {
      const double y =
          (static_cast<int>(c) == labels[s] ? 1.0 - eps : 0.0) + eps / k;
      dz[c] = (std::exp(logp[c]) - y) * inv;
    }
    for (std::size_t li = net.layers.size(); li-- > 0;) {
      const auto& l = net.layers[li];
      auto& g = grad.layers[li];
      const std::span<const double> in =
          li == 0 ? x : std::span<const double>(t.a[li - 1]);
      for (std::size_t o = 0; o < l.out; ++o) {
        const double d = dz[o];
        if (d == 0.0) continue;
        g.b[o] += d;
        double* grow = g.w.data() + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) grow[i] += d * in[i];
      }
      if (li == 0) break;
      da.assign(l.in, 0.0);
      for (std::size_t o = 0; o < l.out; ++o) {
        const double d = dz[o];
        if (d == 0.0) continue;
        const double* row_w = l.w.data() + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) da[i] += row_w[i] * d;
      }
      const auto& zprev = t.z[li - 1];
      dz.assign(l.in, 0.0);
      for (std::size_t i = 0; i < l.in; ++i) {
        dz[i] = zprev[i] > 0.0 ? da[i] : 0.0;
      }
    }
  }
  return total * inv;
}

void add_decay(const Net& net, double wd, Net& grad) {
  if (wd == 0.0) return;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const auto& l = net.layers[k];
    auto& g = grad.layers[k];
    for (std::size_t i = 0; i < l.w.size(); ++i) g.w[i] += wd * l.w[i];
    for (std::size_t i = 0; i < l.b.size(); ++i) g.b[i] += wd * l.b[i];
  }
}

bool finite(const Net& net) {
  for (const auto& l : net.layers) {
    for (double v : l.w) {
      if (!std::isfinite(v)) return false;
    }
    for (double v : l.b) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

}  // namespace

void MlpConfig::validate() const {
  if (input_dim == 0 || n_classes == 0) {
    throw Error(ErrorCode::kInvalidConfig,
                "input dimension and class count must be positive");
  }
  if (hidden.empty()) {
    throw Error(ErrorCode::kInvalidConfig,
                "the network needs at least one hidden layer", "hidden");
  }
  if (std::find(hidden.begin(), hidden.end(), 0u) != hidden.end()) {
    throw Error(ErrorCode::kInvalidConfig, "hidden widths must be positive",
                "hidden");
  }
}

Schema MlpConfig::schema() const {
  validate();
  Schema schema;
  std::size_t in = input_dim;
  std::vector<std::size_t> outs = hidden;
  outs.push_back(n_classes);
  for (std::size_t k = 0; k < outs.size(); ++k) {
    schema.emplace(weight_name(k), TensorSignature{dtype, {outs[k], in}});
    schema.emplace(bias_name(k), TensorSignature{dtype, {outs[k]}});
    in = outs[k];
  }
  return schema;
}

void TrainHyper::validate() const {
  auto bad = [](const char* field, const std::string& what) {
    throw Error(ErrorCode::kInvalidConfig, std::string(field) + " " + what,
                field);
  };
  if (!(std::isfinite(lr) && lr > 0.0)) bad("lr", "must be positive");
  if (batch == 0) bad("batch", "must be positive");
  if (!(std::isfinite(weight_decay) && weight_decay >= 0.0)) {
    bad("weight_decay", "must be non-negative");
  }
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    bad("label_smoothing", "must lie in [0, 1)");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    bad("momentum", "must lie in [0, 1)");
  }
  if (!(std::isfinite(input_jitter) && input_jitter >= 0.0)) {
    bad("input_jitter", "must be non-negative");
  }
}

nlohmann::json to_json(const TrainHyper& hyper) {
  return {{"lr", hyper.lr},
          {"epochs", hyper.epochs},
          {"weight_decay", hyper.weight_decay},
          {"label_smoothing", hyper.label_smoothing},
          {"batch", hyper.batch},
          {"momentum", hyper.momentum},
          {"input_jitter", hyper.input_jitter},
          {"seed", hyper.seed}};
}

TensorMap init_mlp(const MlpConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Net net = Net::shaped(cfg);
  auto rng = make_rng(seed, 2);
  for (auto& l : net.layers) {
    std::normal_distribution<double> normal(
        0.0, std::sqrt(2.0 / static_cast<double>(l.in)));
    for (auto& v : l.w) v = normal(rng);
  }
  return net.to_params(cfg.dtype);
}

std::vector<double> mlp_logits(const MlpConfig& cfg, const TensorMap& params,
                               std::span<const double> x) {
  const Net net = Net::from_params(cfg, params);
  if (x.size() != cfg.input_dim) {
    throw Error(ErrorCode::kInvalidConfig,
                "input has the wrong dimension for the network");
  }
  Trace t;
  forward(net, x, t);
  return t.a.back();
}

double mlp_loss(const MlpConfig& cfg, const TensorMap& params,
                const LabeledData& data, double weight_decay,
                double label_smoothing) {
  const Net net = Net::from_params(cfg, params);
  check_labels(cfg, data);
  if (data.size() == 0) {
    throw Error(ErrorCode::kEmptyPartition, "loss of an empty sample set");
  }
  Trace t;
  std::vector<double> logp;
  double total = 0.0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    forward(net, data.row(s), t);
    log_softmax(t.a.back(), logp);
    total += smoothed_ce(logp, data.labels[s], label_smoothing);
  }
  return total / static_cast<double>(data.size()) +
         0.5 * weight_decay * net.squared_norm();
}

LossAndGradient mlp_loss_and_gradient(const MlpConfig& cfg,
                                      const TensorMap& params,
                                      const LabeledData& data,
                                      double weight_decay,
                                      double label_smoothing) {
  const Net net = Net::from_params(cfg, params);
  check_labels(cfg, data);
  if (data.size() == 0) {
    throw Error(ErrorCode::kEmptyPartition, "loss of an empty sample set");
  }
  Net grad = Net::shaped(cfg);
  const double loss = batch_gradient(
      net, data.size(), [&](std::size_t s) { return data.row(s); },
      data.labels, label_smoothing, grad);
  add_decay(net, weight_decay, grad);
  return {loss + 0.5 * weight_decay * net.squared_norm(),
          grad.to_params(DType::kF64)};
}

TensorMap train(const MlpConfig& cfg, const LabeledData& data,
                const TrainHyper& hyper, const std::optional<TensorMap>& init) {
  cfg.validate();
  hyper.validate();
  check_labels(cfg, data);
  Net net = Net::from_params(cfg, init ? *init : init_mlp(cfg, hyper.seed));
  if (hyper.epochs == 0 || data.size() == 0) return net.to_params(cfg.dtype);

  Net grad = Net::shaped(cfg);
  Net velocity = Net::shaped(cfg);
  auto shuffle_rng = make_rng(hyper.seed, 3);
  auto jitter_rng = make_rng(hyper.seed, 4);
  std::normal_distribution<double> jitter(0.0, 1.0);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<int> labels;
  std::vector<double> rows;
  const std::size_t dim = data.dim;

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
      const std::size_t count = std::min(hyper.batch, order.size() - start);
      labels.resize(count);
      rows.resize(count * dim);
      for (std::size_t s = 0; s < count; ++s) {
        const std::size_t idx = order[start + s];
        labels[s] = data.labels[idx];
        const auto r = data.row(idx);
        for (std::size_t j = 0; j < dim; ++j) {
          rows[s * dim + j] =
              hyper.input_jitter > 0.0
                  ? r[j] + hyper.input_jitter * jitter(jitter_rng)
                  : r[j];
        }
      }
      const double loss = batch_gradient(
          net, count,
          [&](std::size_t s) {
            return std::span<const double>(rows).subspan(s * dim, dim);
          },
          labels, hyper.label_smoothing, grad);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::kTrainingDiverged,
                    "loss became non-finite in epoch " + std::to_string(epoch));
      }
      add_decay(net, hyper.weight_decay, grad);
      for (std::size_t k = 0; k < net.layers.size(); ++k) {
        auto step = [&](std::vector<double>& p, std::vector<double>& v,
                        const std::vector<double>& g) {
          for (std::size_t i = 0; i < p.size(); ++i) {
            v[i] = hyper.momentum * v[i] + g[i];
            p[i] -= hyper.lr * v[i];
          }
        };
        step(net.layers[k].w, velocity.layers[k].w, grad.layers[k].w);
        step(net.layers[k].b, velocity.layers[k].b, grad.layers[k].b);
      }
    }
    if (!finite(net)) {
      throw Error(ErrorCode::kTrainingDiverged,
                  "parameters became non-finite in epoch " +
                      std::to_string(epoch));
    }
  }
  return net.to_params(cfg.dtype);
}

std::vector<double> sample_losses(const MlpConfig& cfg,
                                  const TensorMap& params,
                                  const LabeledData& data) {
  const Net net = Net::from_params(cfg, params);
  check_labels(cfg, data);
  Trace t;
  std::vector<double> logp;
  std::vector<double> out(data.size());
  for (std::size_t s = 0; s < data.size(); ++s) {
    forward(net, data.row(s), t);
    log_softmax(t.a.back(), logp);
    out[s] = -logp[static_cast<std::size_t>(data.labels[s])];
  }
  return out;
}

double accuracy(const MlpConfig& cfg, const TensorMap& params,
                const LabeledData& data) {
  const Net net = Net::from_params(cfg, params);
  check_labels(cfg, data);
  if (data.size() == 0) {
    throw Error(ErrorCode::kEmptyPartition, "accuracy of an empty sample set");
  }
  Trace t;
  std::size_t correct = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    forward(net, data.row(s), t);
    const auto& logits = t.a.back();
    const auto pred = static_cast<int>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    correct += pred == data.labels[s];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace negmerge
