/*
 * Copyright 2026 The greedlab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "greedlab/autodiff.hpp"
#include "greedlab/errors.hpp"
#include "greedlab/rng.hpp"
#include "greedlab/tensor.hpp"

namespace greedlab {

/// Output head of an MLP: sigmoid for the probability discriminator, linear for
/// the generator and the Wasserstein critic.
enum class Head : std::uint8_t { kSigmoid = 0, kLinear = 1 };

/// Sigmoid outputs are clamped to this interval so that logs stay finite.
inline constexpr double kProbFloor = 1e-7;
inline constexpr double kProbCeil = 1.0 - 1e-7;

struct Layer {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]

  bool operator==(const Layer&) const = default;
};

/// Fully connected network: ReLU after every layer except the last, then the head.
struct MlpParams {
  std::vector<Layer> layers;
  Head head = Head::kLinear;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
    return n;
  }

  /// Visits weight and bias tensors in layer order (w0, b0, w1, b1, ...).
  template <typename F>
  void for_each_tensor(F&& f) {
    for (auto& layer : layers) {
      f(layer.weight);
      f(layer.bias);
    }
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    for (const auto& layer : layers) {
      f(layer.weight);
      f(layer.bias);
    }
  }

  bool operator==(const MlpParams&) const = default;
};

/// Glorot-uniform weights, zero biases. `dims` lists layer widths from input to output.
inline MlpParams init_params(std::uint64_t seed, std::span<const std::size_t> dims, Head head) {
  require(dims.size() >= 2, "init_params: need at least input and output widths");
  for (auto d : dims) require(d > 0, "init_params: layer widths must be positive");
  Rng rng(seed);
  MlpParams params;
  params.head = head;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t fan_in = dims[l];
    const std::size_t fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Layer layer{Tensor(Shape::matrix(fan_out, fan_in)), Tensor(Shape::vector(fan_out))};
    for (auto& w : layer.weight.values()) w = rng.uniform(-bound, bound);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

inline MlpParams init_params(std::uint64_t seed, std::initializer_list<std::size_t> dims, Head head) {
  return init_params(seed, std::span<const std::size_t>(dims.begin(), dims.size()), head);
}

/// Zero-filled tensors mirroring `params`.
inline MlpParams zeros_like(const MlpParams& params) {
  MlpParams out = params;
  out.for_each_tensor([](Tensor& t) { t.fill(0.0); });
  return out;
}

/// An MlpParams registered on a tape as leaves.
struct MlpBinding {
  struct LayerVars {
    Var weight;
    Var weight_t;
    Var bias;
  };
  std::vector<LayerVars> layers;
  Head head = Head::kLinear;
  std::size_t input_dim = 0;
};

inline MlpBinding bind(Tape& tape, const MlpParams& params, bool requires_grad) {
  MlpBinding binding;
  binding.head = params.head;
  binding.input_dim = params.input_dim();
  for (const auto& layer : params.layers) {
    const Var w = tape.leaf(layer.weight, requires_grad);
    binding.layers.push_back({w, transpose(w), tape.leaf(layer.bias, requires_grad)});
  }
  return binding;
}

/// Builds the network graph on `input`'s tape. Rows of `input` are samples.
inline Var mlp_forward(const MlpBinding& net, Var input) {
  if (input.shape().rank() != 2 || input.shape().cols() != net.input_dim) {
    throw ShapeError("mlp_forward: input " + input.shape().str() + " does not match fan_in " +
                     std::to_string(net.input_dim));
  }
  Var h = input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    h = add(matmul(h, net.layers[l].weight_t), net.layers[l].bias);
    if (l + 1 < net.layers.size()) h = relu(h);
  }
  if (net.head == Head::kSigmoid) h = clamp(sigmoid(h), kProbFloor, kProbCeil);
  return h;
}

/// Graph-free evaluation, for sampling and metrics.
inline Tensor mlp_apply(const MlpParams& params, const Tensor& input) {
  if (input.shape().rank() != 2 || input.cols() != params.input_dim()) {
    throw ShapeError("mlp_apply: input " + input.shape().str() + " does not match fan_in " +
                     std::to_string(params.input_dim()));
  }
  RowMatrix h = input.mat();
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    RowMatrix next = h * layer.weight.mat().transpose();
    next.rowwise() += layer.bias.mat().row(0);
    if (l + 1 < params.layers.size()) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  Tensor out(Shape::matrix(static_cast<std::size_t>(h.rows()), static_cast<std::size_t>(h.cols())));
  out.mat() = h;
  if (params.head == Head::kSigmoid) {
    for (auto& v : out.values()) v = std::min(std::max(detail::stable_sigmoid(v), kProbFloor), kProbCeil);
  }
  return out;
}

/// Reads the accumulated leaf gradients of a binding into an MlpParams-shaped value.
inline MlpParams gradients(const Tape& tape, const MlpBinding& net, const MlpParams& like) {
  MlpParams grads = like;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    grads.layers[l].weight = tape.grad(net.layers[l].weight);
    grads.layers[l].bias = tape.grad(net.layers[l].bias);
  }
  return grads;
}

struct AdamHyper {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  MlpParams m;
  MlpParams v;
  std::uint64_t step_count = 0;
  AdamHyper hyper;

  static AdamState for_params(const MlpParams& params, AdamHyper hyper = {}) {
    return AdamState{zeros_like(params), zeros_like(params), 0, hyper};
  }
};

namespace detail {
inline void require_same_layout(const MlpParams& a, const MlpParams& b, const char* who) {
  bool same = a.layers.size() == b.layers.size();
  for (std::size_t l = 0; same && l < a.layers.size(); ++l) {
    same = a.layers[l].weight.shape() == b.layers[l].weight.shape() &&
           a.layers[l].bias.shape() == b.layers[l].bias.shape();
  }
  if (!same) throw ShapeError(std::string(who) + ": parameter layouts differ");
}
}  // namespace detail

/// Bias-corrected Adam update in place.
inline void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state) {
  detail::require_same_layout(params, grads, "adam_step");
  detail::require_same_layout(params, state.m, "adam_step");
  state.step_count += 1;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step_count);
  const double correct1 = 1.0 - std::pow(h.beta1, t);
  const double correct2 = 1.0 - std::pow(h.beta2, t);

  const auto update = [&](Tensor& p, const Tensor& g, Tensor& m, Tensor& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      p[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weight, grads.layers[l].weight, state.m.layers[l].weight,
           state.v.layers[l].weight);
    update(params.layers[l].bias, grads.layers[l].bias, state.m.layers[l].bias,
           state.v.layers[l].bias);
  }
}

/// Clamps every weight and bias into [-c, c].
inline void clip_weights(MlpParams& params, double c) {
  require(c > 0.0, "clip_weights: clip bound must be positive");
  params.for_each_tensor([c](Tensor& t) {
    for (auto& v : t.values()) v = std::min(std::max(v, -c), c);
  });
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Binary, little-endian throughout:
//   magic   8 bytes  "GLCKPT\0\1"
//   seed    u64
//   step    u64
//   count   u32      number of networks
//   per network:
//     name_len u32, name bytes (no terminator)
//     head     u8   (0 sigmoid, 1 linear)
//     layers   u32
//     per layer: out u64, in u64, weights f64[out*in] row-major, bias f64[out]
// ---------------------------------------------------------------------------

struct NamedNetwork {
  std::string name;
  MlpParams params;

  bool operator==(const NamedNetwork&) const = default;
};

struct Checkpoint {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::vector<NamedNetwork> networks;

  const MlpParams& network(const std::string& name) const {
    for (const auto& n : networks) {
      if (n.name == name) return n.params;
    }
    throw ContractError("checkpoint: no network named '" + name + "'");
  }

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr char kCheckpointMagic[8] = {'G', 'L', 'C', 'K', 'P', 'T', '\0', '\1'};

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.append(bytes.data(), bytes.size());
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    std::array<char, sizeof(T)> raw;
    take(raw.data(), raw.size());
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    return std::bit_cast<T>(raw);
  }

  void take(char* dst, std::size_t n) {
    if (bytes_.size() - pos_ < n) throw IoError("checkpoint: truncated file");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_le(out, ckpt.seed);
  detail::put_le(out, ckpt.step);
  detail::put_le(out, static_cast<std::uint32_t>(ckpt.networks.size()));
  for (const auto& net : ckpt.networks) {
    detail::put_le(out, static_cast<std::uint32_t>(net.name.size()));
    out += net.name;
    detail::put_le(out, static_cast<std::uint8_t>(net.params.head));
    detail::put_le(out, static_cast<std::uint32_t>(net.params.layers.size()));
    for (const auto& layer : net.params.layers) {
      detail::put_le(out, static_cast<std::uint64_t>(layer.weight.rows()));
      detail::put_le(out, static_cast<std::uint64_t>(layer.weight.cols()));
      for (double w : layer.weight.values()) detail::put_le(out, w);
      for (double b : layer.bias.values()) detail::put_le(out, b);
    }
  }
  return out;
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  detail::ByteReader in(bytes);
  char magic[sizeof(kCheckpointMagic)];
  in.take(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw IoError("checkpoint: bad magic");
  }
  Checkpoint ckpt;
  ckpt.seed = in.get<std::uint64_t>();
  ckpt.step = in.get<std::uint64_t>();
  const auto count = in.get<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedNetwork net;
    net.name.resize(in.get<std::uint32_t>());
    in.take(net.name.data(), net.name.size());
    const auto head = in.get<std::uint8_t>();
    if (head > 1) throw IoError("checkpoint: unknown head tag " + std::to_string(head));
    net.params.head = static_cast<Head>(head);
    const auto layers = in.get<std::uint32_t>();
    for (std::uint32_t l = 0; l < layers; ++l) {
      const auto rows = in.get<std::uint64_t>();
      const auto cols = in.get<std::uint64_t>();
      if (rows == 0 || cols == 0 || rows > (1u << 24) || cols > (1u << 24)) {
        throw IoError("checkpoint: implausible layer shape");
      }
      Layer layer{Tensor(Shape::matrix(rows, cols)), Tensor(Shape::vector(rows))};
      for (auto& w : layer.weight.values()) w = in.get<double>();
      for (auto& b : layer.bias.values()) b = in.get<double>();
      net.params.layers.push_back(std::move(layer));
    }
    ckpt.networks.push_back(std::move(net));
  }
  if (!in.done()) throw IoError("checkpoint: trailing bytes");
  return ckpt;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const std::string bytes = encode_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace greedlab
