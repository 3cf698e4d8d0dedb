// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "embed/provider.hpp"

namespace notecoder::nn {

using embed::EmbeddingTensor;

enum class Activation { kRelu, kSigmoid, kIdentity };

struct ConvSpec {
  std::vector<std::size_t> kernel_widths{3, 4, 5};
  std::size_t filters_per_width = 64;
  std::size_t input_dim = 128;

  std::size_t features() const {
    return kernel_widths.size() * filters_per_width;
  }
};

struct DenseSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::kRelu;
};

// Multi-width text CNN: valid 1-D convolutions over the token axis, ReLU,
// max-over-time pooling, concatenation with an optional auxiliary vector,
// then a chain of dense layers ending in a sigmoid.
//
// An empty kernel_widths list drops the convolution entirely, leaving a
// dense network over the auxiliary input.
struct NetSpec {
  ConvSpec conv;
  std::size_t aux_dim = 0;
  std::vector<DenseSpec> dense;

  // widths/filters conv, one hidden ReLU layer (skipped when hidden == 0),
  // sigmoid output.
  static NetSpec text_cnn(std::size_t input_dim, std::vector<std::size_t> widths,
                          std::size_t filters, std::size_t hidden,
                          std::size_t out_dim, std::size_t aux_dim = 0);

  std::size_t out_dim() const { return dense.empty() ? 0 : dense.back().out_dim; }
  std::size_t dense_input_dim() const { return conv.features() + aux_dim; }

  // Throws Error(kShape) on inconsistent dimensions; L = 0 skips the
  // kernel-width check.
  void validate(std::size_t L = 0) const;
  std::uint64_t signature() const;

  bool operator==(const NetSpec& o) const { return signature() == o.signature(); }
};

nlohmann::json to_json(const NetSpec& spec);
NetSpec net_spec_from_json(const nlohmann::json& j);

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;

  std::size_t size() const { return data.size(); }
};

// Named parameter tensors in a fixed order:
//   conv_w{i} [F, w_i, D], conv_b{i} [F] per kernel width,
//   dense_w{j} [out, in], dense_b{j} [out] per dense layer.
// A GradSet has exactly the same shapes.
struct ParamSet {
  std::vector<Tensor> tensors;

  std::size_t total() const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  ParamSet zeros_like() const;
  bool same_shapes(const ParamSet& other) const;
  void set_zero();
  bool all_finite() const;
  // Rounds every value to the nearest float; checkpoints store float32.
  void round_to_float();

  // Flat views used by gradient checks and the optimizer.
  double& flat(std::size_t i);
  double flat(std::size_t i) const;
};
using GradSet = ParamSet;

// Zero-filled parameters with the layout above.
ParamSet make_params(const NetSpec& spec);
// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
ParamSet init_params(const NetSpec& spec, std::uint64_t seed);

bool is_conv_tensor(const std::string& name);

// Intermediates of one forward pass, consumed by backward. Holds a pointer to
// the input embedding, which must outlive the cache.
struct ForwardCache {
  bool valid = false;
  std::uint64_t spec_signature = 0;
  const EmbeddingTensor* input = nullptr;
  // Per width: argmax window start and pooled pre-activation max, per filter.
  std::vector<std::vector<std::size_t>> argmax;
  std::vector<std::vector<double>> pooled_pre;
  // Inputs to each dense layer (the first is features ++ aux) and their
  // pre-activations.
  std::vector<std::vector<double>> layer_in;
  std::vector<std::vector<double>> layer_pre;
  std::vector<double> probs;
  // Pooled conv features (length conv.features()).
  std::vector<double> features;
  // Per-input multipliers applied before the first dense layer (dropout).
  std::vector<double> input_scale;
  // True when features were supplied directly and conv must not receive
  // gradient.
  bool conv_bypassed = false;
};

// Full forward pass. aux must have spec.aux_dim entries. Returns probs in
// (0, 1)^out_dim (up to double rounding at extreme logits). Throws kShape on
// mismatched shapes and kNumeric on non-finite intermediates.
//
// input_scale, if non-empty, multiplies features ++ aux element-wise before
// the first dense layer; training passes an inverted-dropout mask here.
std::vector<double> forward(const EmbeddingTensor& embedding,
                            std::span<const double> aux, const ParamSet& params,
                            const NetSpec& spec, ForwardCache* cache = nullptr,
                            std::span<const double> input_scale = {});

// Pooled conv features only.
std::vector<double> conv_features(const EmbeddingTensor& embedding,
                                  const ParamSet& params, const NetSpec& spec);

// Dense head over precomputed pooled features. Backward through this cache
// leaves the conv gradients untouched.
std::vector<double> forward_from_features(std::span<const double> features,
                                          std::span<const double> aux,
                                          const ParamSet& params,
                                          const NetSpec& spec,
                                          ForwardCache* cache = nullptr,
                                          std::span<const double> input_scale = {});

inline constexpr double kProbClamp = 1e-7;

// Mean over labels of binary cross-entropy, with p clamped to
// [1e-7, 1 - 1e-7]. labels may be 0/1 or soft targets in [0, 1].
double bce_loss(std::span<const double> probs, std::span<const double> labels);

// d(bce_loss)/d(logit): (p - y) / K, zero where p is clamped.
std::vector<double> bce_logit_grad(std::span<const double> probs,
                                   std::span<const double> labels);

// Accumulates gradients of bce_loss(forward(...), labels) into grads.
void backward(const ForwardCache& cache, std::span<const double> labels,
              const ParamSet& params, const NetSpec& spec, GradSet& grads);

// Accumulates gradients for an arbitrary upstream d(loss)/d(logits).
void backward_from_logits(const ForwardCache& cache,
                          std::span<const double> dlogits,
                          const ParamSet& params, const NetSpec& spec,
                          GradSet& grads);

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::uint64_t t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const ParamSet& params, double lr = 1e-3);
};

// Bias-corrected Adam. Tensors whose `frozen` flag is set are left untouched
// (their moments too). t increments by one per call.
void adam_step(ParamSet& params, const GradSet& grads, AdamState& state,
               const std::vector<bool>* frozen = nullptr);

// Max over scalar parameters of |analytic - numeric| /
// max(1e-8, |analytic| + |numeric|), numeric being the central difference
// (loss(theta + h) - loss(theta - h)) / 2h.
double grad_check(const ParamSet& params, const NetSpec& spec,
                  const EmbeddingTensor& embedding, std::span<const double> aux,
                  std::span<const double> labels, double h = 1e-5);

// Checkpoint container: one JSON header line, then float32 little-endian
// tensors in header order.
struct Checkpoint {
  NetSpec spec;
  ParamSet params;
  nlohmann::json meta = nlohmann::json::object();
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

inline constexpr int kCheckpointVersion = 1;

}  // namespace notecoder::nn
