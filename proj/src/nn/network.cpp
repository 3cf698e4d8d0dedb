// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include "nn/network.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/random.hpp"

namespace notecoder::nn {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using StridedRows =
    Eigen::Map<const RowMatrix, Eigen::Unaligned, Eigen::OuterStride<>>;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::kRelu: return z > 0 ? z : 0.0;
    case Activation::kSigmoid: return sigmoid(z);
    case Activation::kIdentity: return z;
  }
  return z;
}

double activation_grad(Activation a, double pre, double out) {
  switch (a) {
    case Activation::kRelu: return pre > 0 ? 1.0 : 0.0;
    case Activation::kSigmoid: return out * (1.0 - out);
    case Activation::kIdentity: return 1.0;
  }
  return 1.0;
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "identity") return Activation::kIdentity;
  fail(ErrorCode::kFormat, "unknown activation '" + s + "'");
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void check_params(const ParamSet& params, const NetSpec& spec) {
  const std::size_t expected = 2 * (spec.conv.kernel_widths.size() + spec.dense.size());
  require(params.tensors.size() == expected, ErrorCode::kShape,
          "parameter set does not match network spec");
  std::size_t k = 0;
  const std::size_t F = spec.conv.filters_per_width;
  for (std::size_t w : spec.conv.kernel_widths) {
    require(params.tensors[k].size() == F * w * spec.conv.input_dim &&
                params.tensors[k + 1].size() == F,
            ErrorCode::kShape,
            "conv parameter shape mismatch at " + params.tensors[k].name + " " +
                shape_string(params.tensors[k].shape));
    k += 2;
  }
  for (const auto& d : spec.dense) {
    require(params.tensors[k].size() == d.out_dim * d.in_dim &&
                params.tensors[k + 1].size() == d.out_dim,
            ErrorCode::kShape, "dense parameter shape mismatch");
    k += 2;
  }
}

void check_finite(std::span<const double> v, const char* where) {
  for (double x : v)
    require(std::isfinite(x), ErrorCode::kNumeric,
            std::string("non-finite value in ") + where);
}

// Dense stack over `input`; fills cache layers when given.
std::vector<double> run_dense(std::vector<double> input, std::span<const double> input_scale,
                              const ParamSet& params, const NetSpec& spec,
                              ForwardCache* cache) {
  const std::size_t first = 2 * spec.conv.kernel_widths.size();
  std::vector<double> x = std::move(input);
  if (!input_scale.empty()) {
    require(input_scale.size() == x.size(), ErrorCode::kShape,
            "input scale length != dense input");
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= input_scale[i];
    if (cache) cache->input_scale.assign(input_scale.begin(), input_scale.end());
  }
  for (std::size_t j = 0; j < spec.dense.size(); ++j) {
    const auto& d = spec.dense[j];
    const auto& W = params.tensors[first + 2 * j];
    const auto& b = params.tensors[first + 2 * j + 1];
    std::vector<double> pre(d.out_dim);
    VecMap(pre.data(), d.out_dim) =
        ConstRowMap(W.data.data(), d.out_dim, d.in_dim) *
            ConstVecMap(x.data(), d.in_dim) +
        ConstVecMap(b.data.data(), d.out_dim);
    check_finite(pre, "dense layer");
    std::vector<double> out(d.out_dim);
    for (std::size_t o = 0; o < d.out_dim; ++o) out[o] = activate(d.activation, pre[o]);
    if (cache) {
      cache->layer_in.push_back(std::move(x));
      cache->layer_pre.push_back(std::move(pre));
    }
    x = std::move(out);
  }
  return x;
}

std::vector<double> pooled_conv(const EmbeddingTensor& emb,
                                const ParamSet& params, const NetSpec& spec,
                                ForwardCache* cache) {
  const auto& conv = spec.conv;
  const std::size_t F = conv.filters_per_width;
  const std::size_t D = conv.input_dim;
  std::vector<double> features(conv.features(), 0.0);
  if (conv.kernel_widths.empty()) return features;
  require(emb.D == D, ErrorCode::kShape,
          "embedding width " + std::to_string(emb.D) + " != conv input dim " +
              std::to_string(D));
  require(emb.values.size() == emb.L * emb.D, ErrorCode::kShape,
          "embedding storage does not match L x D");
  const std::size_t valid = std::min(emb.valid_rows, emb.L);

  for (std::size_t i = 0; i < conv.kernel_widths.size(); ++i) {
    const std::size_t w = conv.kernel_widths[i];
    require(w <= emb.L, ErrorCode::kShape,
            "kernel width " + std::to_string(w) + " exceeds chunk length");
    const std::size_t positions = emb.L - w + 1;
    // Windows starting at or after `valid` only see zero rows: their
    // response is the bias.
    const std::size_t computed = std::min(positions, valid);
    const auto& W = params.tensors[2 * i];
    const auto& b = params.tensors[2 * i + 1];

    RowMatrix pre;
    if (computed > 0) {
      StridedRows windows(emb.values.data(), static_cast<Eigen::Index>(computed),
                          static_cast<Eigen::Index>(w * D),
                          Eigen::OuterStride<>(static_cast<Eigen::Index>(D)));
      pre.noalias() = windows * ConstRowMap(W.data.data(), F, w * D).transpose();
      require(pre.allFinite(), ErrorCode::kNumeric, "non-finite conv response");
    }

    std::vector<std::size_t> arg(F, 0);
    std::vector<double> best(F);
    for (std::size_t f = 0; f < F; ++f) {
      double m = -std::numeric_limits<double>::infinity();
      std::size_t a = 0;
      for (std::size_t t = 0; t < computed; ++t) {
        const double v = pre(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(f));
        if (v > m) {
          m = v;
          a = t;
        }
      }
      m += computed > 0 ? b.data[f] : 0.0;
      if (computed < positions && (computed == 0 || b.data[f] > m)) {
        m = b.data[f];
        a = computed;
      }
      require(std::isfinite(m), ErrorCode::kNumeric, "non-finite conv response");
      best[f] = m;
      arg[f] = a;
      features[i * F + f] = m > 0 ? m : 0.0;
    }
    if (cache) {
      cache->argmax.push_back(std::move(arg));
      cache->pooled_pre.push_back(std::move(best));
    }
  }
  return features;
}

}  // namespace

NetSpec NetSpec::text_cnn(std::size_t input_dim, std::vector<std::size_t> widths,
                          std::size_t filters, std::size_t hidden,
                          std::size_t out_dim, std::size_t aux_dim) {
  NetSpec s;
  s.conv.kernel_widths = std::move(widths);
  s.conv.filters_per_width = filters;
  s.conv.input_dim = input_dim;
  s.aux_dim = aux_dim;
  const std::size_t in = s.dense_input_dim();
  if (hidden > 0) {
    s.dense.push_back({in, hidden, Activation::kRelu});
    s.dense.push_back({hidden, out_dim, Activation::kSigmoid});
  } else {
    s.dense.push_back({in, out_dim, Activation::kSigmoid});
  }
  return s;
}

void NetSpec::validate(std::size_t L) const {
  if (!conv.kernel_widths.empty()) {
    require(conv.filters_per_width >= 1, ErrorCode::kShape, "filters must be >= 1");
    require(conv.input_dim >= 1, ErrorCode::kShape, "conv input dim must be >= 1");
    for (std::size_t w : conv.kernel_widths) {
      require(w >= 1, ErrorCode::kShape, "kernel widths must be positive");
      require(L == 0 || w <= L, ErrorCode::kShape, "kernel width exceeds L");
    }
  }
  require(!dense.empty(), ErrorCode::kShape, "network needs a dense layer");
  require(dense.front().in_dim == dense_input_dim(), ErrorCode::kShape,
          "first dense layer input != conv features + aux");
  for (std::size_t j = 0; j < dense.size(); ++j) {
    require(dense[j].in_dim >= 1 && dense[j].out_dim >= 1, ErrorCode::kShape,
            "dense dims must be >= 1");
    if (j > 0)
      require(dense[j].in_dim == dense[j - 1].out_dim, ErrorCode::kShape,
              "dense layer dims do not chain");
  }
  require(dense.back().activation == Activation::kSigmoid, ErrorCode::kShape,
          "output layer must be sigmoid");
}

std::uint64_t NetSpec::signature() const { return fnv1a64(to_json(*this).dump()); }

nlohmann::json to_json(const NetSpec& spec) {
  nlohmann::json dense = nlohmann::json::array();
  for (const auto& d : spec.dense)
    dense.push_back({{"in", d.in_dim},
                     {"out", d.out_dim},
                     {"activation", activation_name(d.activation)}});
  return {{"conv",
           {{"kernel_widths", spec.conv.kernel_widths},
            {"filters_per_width", spec.conv.filters_per_width},
            {"input_dim", spec.conv.input_dim}}},
          {"aux_dim", spec.aux_dim},
          {"dense", dense}};
}

NetSpec net_spec_from_json(const nlohmann::json& j) {
  NetSpec s;
  try {
    s.conv.kernel_widths = j.at("conv").at("kernel_widths").get<std::vector<std::size_t>>();
    s.conv.filters_per_width = j.at("conv").at("filters_per_width").get<std::size_t>();
    s.conv.input_dim = j.at("conv").at("input_dim").get<std::size_t>();
    s.aux_dim = j.at("aux_dim").get<std::size_t>();
    for (const auto& d : j.at("dense"))
      s.dense.push_back({d.at("in").get<std::size_t>(), d.at("out").get<std::size_t>(),
                         activation_from_name(d.at("activation").get<std::string>())});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("network spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::size_t ParamSet::total() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

Tensor& ParamSet::at(const std::string& name) {
  for (auto& t : tensors)
    if (t.name == name) return t;
  fail(ErrorCode::kInvalidArgument, "no tensor named " + name);
}

const Tensor& ParamSet::at(const std::string& name) const {
  return const_cast<ParamSet*>(this)->at(name);
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z = *this;
  z.set_zero();
  return z;
}

bool ParamSet::same_shapes(const ParamSet& other) const {
  if (tensors.size() != other.tensors.size()) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (tensors[i].shape != other.tensors[i].shape ||
        tensors[i].size() != other.tensors[i].size())
      return false;
  return true;
}

void ParamSet::set_zero() {
  for (auto& t : tensors) std::fill(t.data.begin(), t.data.end(), 0.0);
}

bool ParamSet::all_finite() const {
  for (const auto& t : tensors)
    for (double x : t.data)
      if (!std::isfinite(x)) return false;
  return true;
}

void ParamSet::round_to_float() {
  for (auto& t : tensors)
    for (double& x : t.data) x = static_cast<double>(static_cast<float>(x));
}

double& ParamSet::flat(std::size_t i) {
  for (auto& t : tensors) {
    if (i < t.size()) return t.data[i];
    i -= t.size();
  }
  fail(ErrorCode::kInvalidArgument, "flat parameter index out of range");
}

double ParamSet::flat(std::size_t i) const {
  return const_cast<ParamSet*>(this)->flat(i);
}

ParamSet make_params(const NetSpec& spec) {
  spec.validate();
  ParamSet p;
  const std::size_t F = spec.conv.filters_per_width;
  for (std::size_t i = 0; i < spec.conv.kernel_widths.size(); ++i) {
    const std::size_t w = spec.conv.kernel_widths[i];
    p.tensors.push_back({"conv_w" + std::to_string(i), {F, w, spec.conv.input_dim},
                         std::vector<double>(F * w * spec.conv.input_dim, 0.0)});
    p.tensors.push_back({"conv_b" + std::to_string(i), {F}, std::vector<double>(F, 0.0)});
  }
  for (std::size_t j = 0; j < spec.dense.size(); ++j) {
    const auto& d = spec.dense[j];
    p.tensors.push_back({"dense_w" + std::to_string(j), {d.out_dim, d.in_dim},
                         std::vector<double>(d.out_dim * d.in_dim, 0.0)});
    p.tensors.push_back({"dense_b" + std::to_string(j), {d.out_dim},
                         std::vector<double>(d.out_dim, 0.0)});
  }
  return p;
}

ParamSet init_params(const NetSpec& spec, std::uint64_t seed) {
  ParamSet p = make_params(spec);
  Rng rng(mix(seed, std::string_view("init_params")));
  const std::size_t F = spec.conv.filters_per_width;
  std::size_t k = 0;
  for (std::size_t w : spec.conv.kernel_widths) {
    const double fan_in = static_cast<double>(w * spec.conv.input_dim);
    const double limit = std::sqrt(6.0 / (fan_in + static_cast<double>(F)));
    for (double& x : p.tensors[k].data) x = rng.uniform(-limit, limit);
    k += 2;
  }
  for (const auto& d : spec.dense) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(d.in_dim + d.out_dim));
    for (double& x : p.tensors[k].data) x = rng.uniform(-limit, limit);
    k += 2;
  }
  return p;
}

bool is_conv_tensor(const std::string& name) { return name.starts_with("conv_"); }

std::vector<double> forward(const EmbeddingTensor& embedding,
                            std::span<const double> aux, const ParamSet& params,
                            const NetSpec& spec, ForwardCache* cache,
                            std::span<const double> input_scale) {
  check_params(params, spec);
  require(aux.size() == spec.aux_dim, ErrorCode::kShape,
          "aux input has " + std::to_string(aux.size()) + " values, expected " +
              std::to_string(spec.aux_dim));
  if (cache) *cache = ForwardCache{};
  std::vector<double> features = pooled_conv(embedding, params, spec, cache);
  std::vector<double> input = features;
  input.insert(input.end(), aux.begin(), aux.end());
  std::vector<double> probs = run_dense(std::move(input), input_scale, params, spec, cache);
  if (cache) {
    cache->valid = true;
    cache->spec_signature = spec.signature();
    cache->input = &embedding;
    cache->probs = probs;
    cache->features = std::move(features);
  }
  return probs;
}

std::vector<double> conv_features(const EmbeddingTensor& embedding,
                                  const ParamSet& params, const NetSpec& spec) {
  check_params(params, spec);
  return pooled_conv(embedding, params, spec, nullptr);
}

std::vector<double> forward_from_features(std::span<const double> features,
                                          std::span<const double> aux,
                                          const ParamSet& params,
                                          const NetSpec& spec,
                                          ForwardCache* cache,
                                          std::span<const double> input_scale) {
  check_params(params, spec);
  require(features.size() == spec.conv.features() && aux.size() == spec.aux_dim,
          ErrorCode::kShape, "feature/aux sizes do not match network spec");
  if (cache) *cache = ForwardCache{};
  std::vector<double> input(features.begin(), features.end());
  input.insert(input.end(), aux.begin(), aux.end());
  std::vector<double> probs = run_dense(std::move(input), input_scale, params, spec, cache);
  if (cache) {
    cache->valid = true;
    cache->spec_signature = spec.signature();
    cache->conv_bypassed = true;
    cache->probs = probs;
    cache->features.assign(features.begin(), features.end());
  }
  return probs;
}

double bce_loss(std::span<const double> probs, std::span<const double> labels) {
  require(probs.size() == labels.size(), ErrorCode::kShape,
          "bce_loss: probs and labels differ in length");
  if (probs.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double p = std::clamp(probs[k], kProbClamp, 1.0 - kProbClamp);
    const double y = labels[k];
    sum += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  return sum / static_cast<double>(probs.size());
}

std::vector<double> bce_logit_grad(std::span<const double> probs,
                                   std::span<const double> labels) {
  require(probs.size() == labels.size(), ErrorCode::kShape,
          "bce_logit_grad: probs and labels differ in length");
  std::vector<double> g(probs.size(), 0.0);
  const double inv_k = 1.0 / static_cast<double>(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double p = probs[k];
    if (p < kProbClamp || p > 1.0 - kProbClamp) continue;
    g[k] = (p - labels[k]) * inv_k;
  }
  return g;
}

void backward(const ForwardCache& cache, std::span<const double> labels,
              const ParamSet& params, const NetSpec& spec, GradSet& grads) {
  require(cache.valid, ErrorCode::kUsage, "backward called without a forward cache");
  const auto dlogits = bce_logit_grad(cache.probs, labels);
  backward_from_logits(cache, dlogits, params, spec, grads);
}

void backward_from_logits(const ForwardCache& cache,
                          std::span<const double> dlogits,
                          const ParamSet& params, const NetSpec& spec,
                          GradSet& grads) {
  require(cache.valid && cache.spec_signature == spec.signature(),
          ErrorCode::kUsage, "forward cache is stale or from another network");
  require(grads.same_shapes(params), ErrorCode::kShape,
          "gradient set does not mirror parameters");
  require(dlogits.size() == spec.out_dim(), ErrorCode::kShape,
          "upstream gradient length != network outputs");
  check_params(params, spec);

  const std::size_t first = 2 * spec.conv.kernel_widths.size();
  std::vector<double> delta(dlogits.begin(), dlogits.end());
  for (std::size_t jj = spec.dense.size(); jj-- > 0;) {
    const auto& d = spec.dense[jj];
    const auto& in = cache.layer_in[jj];
    const auto& W = params.tensors[first + 2 * jj];
    auto& dW = grads.tensors[first + 2 * jj];
    auto& db = grads.tensors[first + 2 * jj + 1];
    const ConstVecMap dv(delta.data(), d.out_dim);
    RowMap(dW.data.data(), d.out_dim, d.in_dim).noalias() +=
        dv * ConstVecMap(in.data(), d.in_dim).transpose();
    VecMap(db.data.data(), d.out_dim) += dv;

    std::vector<double> din(d.in_dim);
    VecMap(din.data(), d.in_dim).noalias() =
        ConstRowMap(W.data.data(), d.out_dim, d.in_dim).transpose() * dv;
    if (jj == 0) {
      if (!cache.input_scale.empty())
        for (std::size_t i = 0; i < d.in_dim; ++i) din[i] *= cache.input_scale[i];
      delta = std::move(din);
      break;
    }
    const auto& prev = spec.dense[jj - 1];
    const auto& prev_pre = cache.layer_pre[jj - 1];
    for (std::size_t i = 0; i < d.in_dim; ++i)
      din[i] *= activation_grad(prev.activation, prev_pre[i], in[i]);
    delta = std::move(din);
  }

  if (cache.conv_bypassed || spec.conv.kernel_widths.empty()) return;
  require(cache.input != nullptr, ErrorCode::kUsage, "forward cache lost its input");
  const EmbeddingTensor& emb = *cache.input;
  const std::size_t F = spec.conv.filters_per_width;
  const std::size_t D = spec.conv.input_dim;
  for (std::size_t i = 0; i < spec.conv.kernel_widths.size(); ++i) {
    const std::size_t w = spec.conv.kernel_widths[i];
    auto& dW = grads.tensors[2 * i];
    auto& db = grads.tensors[2 * i + 1];
    for (std::size_t f = 0; f < F; ++f) {
      if (cache.pooled_pre[i][f] <= 0) continue;  // ReLU closed
      const double g = delta[i * F + f];
      if (g == 0.0) continue;
      db.data[f] += g;
      const double* window = emb.row(cache.argmax[i][f]);
      double* dst = dW.data.data() + f * w * D;
      for (std::size_t k = 0; k < w * D; ++k) dst[k] += g * window[k];
    }
  }
}

AdamState AdamState::for_params(const ParamSet& params, double lr) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  s.lr = lr;
  return s;
}

void adam_step(ParamSet& params, const GradSet& grads, AdamState& state,
               const std::vector<bool>* frozen) {
  require(params.same_shapes(grads) && params.same_shapes(state.m) &&
              params.same_shapes(state.v),
          ErrorCode::kShape, "adam_step: shapes do not mirror");
  require(state.beta1 > 0 && state.beta1 < 1 && state.beta2 > 0 &&
              state.beta2 < 1 && state.eps > 0,
          ErrorCode::kConfig, "adam_step: invalid hyperparameters");
  require(!frozen || frozen->size() == params.tensors.size(), ErrorCode::kShape,
          "adam_step: frozen mask size mismatch");
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.tensors.size(); ++k) {
    if (frozen && (*frozen)[k]) continue;
    auto& p = params.tensors[k].data;
    const auto& g = grads.tensors[k].data;
    auto& m = state.m.tensors[k].data;
    auto& v = state.v.tensors[k].data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double grad_check(const ParamSet& params, const NetSpec& spec,
                  const EmbeddingTensor& embedding, std::span<const double> aux,
                  std::span<const double> labels, double h) {
  require(h > 0, ErrorCode::kInvalidArgument, "grad_check step must be > 0");
  ForwardCache cache;
  forward(embedding, aux, params, spec, &cache);
  GradSet grads = params.zeros_like();
  backward(cache, labels, params, spec, grads);

  ParamSet probe = params;
  double worst = 0.0;
  const std::size_t n = params.total();
  for (std::size_t i = 0; i < n; ++i) {
    double& theta = probe.flat(i);
    const double saved = theta;
    theta = saved + h;
    const double up = bce_loss(forward(embedding, aux, probe, spec), labels);
    theta = saved - h;
    const double down = bce_loss(forward(embedding, aux, probe, spec), labels);
    theta = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = grads.flat(i);
    const double rel = std::abs(analytic - numeric) /
                       std::max(1e-8, std::abs(analytic) + std::abs(numeric));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace notecoder::nn
