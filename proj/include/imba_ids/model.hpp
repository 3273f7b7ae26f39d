#pragma once

// Fully connected ReLU network with inverted dropout on hidden outputs and a
// softmax head, plus exact reverse-mode gradients for its parameters.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "imba_ids/core_math.hpp"
#include "imba_ids/errors.hpp"
#include "imba_ids/parallel.hpp"

namespace imba_ids {

using Label = std::size_t;
using LabelVector = std::vector<Label>;

struct LayerParams {
  Matrix weights;  // fan_out x fan_in
  std::vector<double> bias;

  std::size_t fan_in() const noexcept { return weights.cols(); }
  std::size_t fan_out() const noexcept { return weights.rows(); }

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

using ParamSet = std::vector<LayerParams>;

inline ParamSet zeros_like(const ParamSet& params) {
  ParamSet out;
  out.reserve(params.size());
  for (const auto& p : params) {
    out.push_back({Matrix(p.fan_out(), p.fan_in()), std::vector<double>(p.bias.size(), 0.0)});
  }
  return out;
}

inline std::size_t parameter_count(const ParamSet& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.weights.size() + p.bias.size();
  return n;
}

inline void require_same_shapes(const ParamSet& a, const ParamSet& b, const char* where) {
  bool ok = a.size() == b.size();
  for (std::size_t l = 0; ok && l < a.size(); ++l) {
    ok = a[l].weights.rows() == b[l].weights.rows() && a[l].weights.cols() == b[l].weights.cols() &&
         a[l].bias.size() == b[l].bias.size();
  }
  if (!ok) throw ShapeError(std::string(where) + ": parameter shapes do not match");
}

struct MlpModel {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t num_classes = 0;
  ParamSet layers;  // hidden layers in order, then the output layer
  // Bumped on every parameter update so stale forward caches can be detected.
  std::uint64_t revision = 0;

  static MlpModel zeros(std::size_t input_dim, std::vector<std::size_t> hidden_dims,
                        std::size_t num_classes) {
    MlpModel m;
    m.input_dim = input_dim;
    m.hidden_dims = std::move(hidden_dims);
    m.num_classes = num_classes;
    std::size_t fan_in = input_dim;
    for (std::size_t width : m.hidden_dims) {
      m.layers.push_back({Matrix(width, fan_in), std::vector<double>(width, 0.0)});
      fan_in = width;
    }
    m.layers.push_back({Matrix(num_classes, fan_in), std::vector<double>(num_classes, 0.0)});
    m.validate();
    return m;
  }

  // He-initialized weights, zero biases.
  static MlpModel initialize(std::size_t input_dim, std::vector<std::size_t> hidden_dims,
                             std::size_t num_classes, Rng& rng) {
    MlpModel m = zeros(input_dim, std::move(hidden_dims), num_classes);
    for (auto& layer : m.layers) layer.weights = he_init(rng, layer.fan_in(), layer.fan_out());
    return m;
  }

  std::size_t hidden_layer_count() const noexcept { return hidden_dims.size(); }

  void validate() const {
    if (input_dim == 0) throw ShapeError("MlpModel: input_dim must be >= 1");
    if (num_classes == 0) throw ShapeError("MlpModel: num_classes must be >= 1");
    if (layers.size() != hidden_dims.size() + 1) {
      throw ShapeError("MlpModel: expected " + std::to_string(hidden_dims.size() + 1) +
                       " layers, found " + std::to_string(layers.size()));
    }
    std::size_t fan_in = input_dim;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::size_t fan_out = l < hidden_dims.size() ? hidden_dims[l] : num_classes;
      const auto& layer = layers[l];
      if (fan_out == 0) throw ShapeError("MlpModel: zero-width hidden layer");
      if (layer.fan_in() != fan_in || layer.fan_out() != fan_out || layer.bias.size() != fan_out) {
        throw ShapeError("MlpModel: layer " + std::to_string(l) + " has weights " +
                         layer.weights.shape() + " and bias " + std::to_string(layer.bias.size()) +
                         ", expected " + std::to_string(fan_out) + "x" + std::to_string(fan_in));
      }
      fan_in = fan_out;
    }
  }

  // Value equality of architecture and parameters; the revision counter is ignored.
  friend bool operator==(const MlpModel& a, const MlpModel& b) {
    return a.input_dim == b.input_dim && a.hidden_dims == b.hidden_dims &&
           a.num_classes == b.num_classes && a.layers == b.layers;
  }
};

struct Relu {
  static double apply(double z) noexcept { return z > 0.0 ? z : 0.0; }
  // Subgradient at exactly 0 is taken as 0.
  static double derivative(double z) noexcept { return z > 0.0 ? 1.0 : 0.0; }
};

enum class Mode { train, eval };

struct ForwardCache {
  std::vector<Matrix> layer_inputs;     // input consumed by each layer (thinned for l >= 1)
  std::vector<Matrix> pre_activations;  // z of each hidden layer
  std::vector<Matrix> activations;      // g(z) of each hidden layer, before dropout
  std::vector<std::vector<std::uint8_t>> masks;  // dropout mask per hidden layer, row-major
  Matrix logits;
  Matrix probs;
  Matrix log_probs;
  double keep_prob = 1.0;
  Mode mode = Mode::eval;
  std::uint64_t model_revision = 0;
  std::size_t batch = 0;
};

// Row-wise log-softmax with max subtraction.
inline Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto z = logits.row(i);
    double max_z = -INFINITY;
    for (double v : z) max_z = std::max(max_z, v);
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - max_z);
    const double log_norm = max_z + std::log(sum);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < z.size(); ++j) dst[j] = z[j] - log_norm;
  }
  return out;
}

inline Matrix exp_elementwise(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.values()) v = std::exp(v);
  return out;
}

inline Matrix softmax(const Matrix& logits) { return exp_elementwise(log_softmax(logits)); }

namespace detail {

inline Matrix affine(const Matrix& input, const LayerParams& layer) {
  Matrix z = matmul_transpose_b(input, layer.weights);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += layer.bias[j];
  }
  return z;
}

}  // namespace detail

/// Forward pass. In train mode each hidden output is multiplied by a fresh
/// Bernoulli(keep_prob) mask and scaled by 1 / keep_prob; in eval mode no
/// masking or scaling happens. Inputs and logits are never dropped.
template <class Activation = Relu>
ForwardCache forward(const MlpModel& model, const Matrix& x, double keep_prob, Mode mode,
                     Rng& rng) {
  if (x.cols() != model.input_dim) {
    throw ShapeError("forward: input is " + x.shape() + " but the model expects " +
                     std::to_string(model.input_dim) + " features");
  }
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw std::invalid_argument("forward: keep_prob must be in (0, 1], got " +
                                std::to_string(keep_prob));
  }
  ForwardCache cache;
  cache.keep_prob = keep_prob;
  cache.mode = mode;
  cache.model_revision = model.revision;
  cache.batch = x.rows();

  const bool dropout = mode == Mode::train && keep_prob < 1.0;
  const double scale = 1.0 / keep_prob;
  Matrix input = x;
  for (std::size_t l = 0; l < model.hidden_layer_count(); ++l) {
    Matrix z = detail::affine(input, model.layers[l]);
    Matrix h = z;
    for (double& v : h.values()) v = Activation::apply(v);
    std::vector<std::uint8_t> mask =
        dropout ? bernoulli_mask(rng, h.size(), keep_prob) : std::vector<std::uint8_t>(h.size(), 1);
    Matrix thinned = h;
    if (dropout) {
      auto values = thinned.values();
      for (std::size_t k = 0; k < values.size(); ++k) values[k] = mask[k] ? values[k] * scale : 0.0;
    }
    cache.layer_inputs.push_back(std::move(input));
    cache.pre_activations.push_back(std::move(z));
    cache.activations.push_back(std::move(h));
    cache.masks.push_back(std::move(mask));
    input = std::move(thinned);
  }
  cache.logits = detail::affine(input, model.layers.back());
  cache.layer_inputs.push_back(std::move(input));
  cache.log_probs = log_softmax(cache.logits);
  cache.probs = exp_elementwise(cache.log_probs);
  return cache;
}

// Eval-mode probabilities. Pure: no randomness is consumed.
template <class Activation = Relu>
Matrix forward_eval(const MlpModel& model, const Matrix& x) {
  Rng unused(0);
  return forward<Activation>(model, x, 1.0, Mode::eval, unused).probs;
}

/// Reverse-mode gradients of a scalar loss with respect to every weight and
/// bias, given d(loss)/d(logits). Dropped units pass no gradient.
template <class Activation = Relu>
ParamSet backward(const MlpModel& model, const ForwardCache& cache, const Matrix& dloss_dlogits) {
  if (cache.model_revision != model.revision) {
    throw std::invalid_argument("backward: forward cache is stale (model revision " +
                                std::to_string(cache.model_revision) + " vs " +
                                std::to_string(model.revision) + ")");
  }
  const std::size_t hidden = model.hidden_layer_count();
  if (cache.layer_inputs.size() != hidden + 1 || cache.pre_activations.size() != hidden ||
      cache.masks.size() != hidden) {
    throw std::invalid_argument("backward: forward cache does not match the model architecture");
  }
  if (dloss_dlogits.rows() != cache.batch || dloss_dlogits.cols() != model.num_classes) {
    throw ShapeError("backward: dloss_dlogits is " + dloss_dlogits.shape() + ", expected " +
                     std::to_string(cache.batch) + "x" + std::to_string(model.num_classes));
  }
  for (std::size_t l = 0; l <= hidden; ++l) {
    if (cache.layer_inputs[l].cols() != model.layers[l].fan_in() ||
        cache.layer_inputs[l].rows() != cache.batch) {
      throw std::invalid_argument("backward: forward cache layer " + std::to_string(l) +
                                  " does not match the model");
    }
  }

  ParamSet grads(model.layers.size());
  const double scale = 1.0 / cache.keep_prob;
  Matrix delta = dloss_dlogits;
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    grads[l].weights = matmul_transpose_a(delta, cache.layer_inputs[l]);
    grads[l].bias.assign(delta.cols(), 0.0);
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      auto row = delta.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) grads[l].bias[j] += row[j];
    }
    if (l == 0) break;

    Matrix upstream = matmul(delta, model.layers[l].weights);
    const auto& mask = cache.masks[l - 1];
    const auto z = cache.pre_activations[l - 1].values();
    auto values = upstream.values();
    const bool scaled = cache.mode == Mode::train && cache.keep_prob < 1.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double through_mask = mask[k] ? (scaled ? values[k] * scale : values[k]) : 0.0;
      values[k] = through_mask * Activation::derivative(z[k]);
    }
    delta = std::move(upstream);
  }
  return grads;
}

// Arg-max of each row; exact ties go to the lowest class index.
inline LabelVector argmax_rows(const Matrix& probs) {
  LabelVector labels(probs.rows(), 0);
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto row = probs.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    labels[i] = best;
  }
  return labels;
}

// Eval-mode class predictions, computed over row blocks in parallel.
template <class Activation = Relu>
LabelVector predict(const MlpModel& model, const Matrix& x) {
  if (x.cols() != model.input_dim) {
    throw ShapeError("predict: input is " + x.shape() + " but the model expects " +
                     std::to_string(model.input_dim) + " features");
  }
  LabelVector labels(x.rows(), 0);
  parallel_for_blocks(x.rows(), 512, [&](std::size_t begin, std::size_t end) {
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = begin; start < end; start += kChunk) {
      const std::size_t stop = std::min(end, start + kChunk);
      std::vector<double> values(x.values().begin() + start * x.cols(),
                                 x.values().begin() + stop * x.cols());
      const Matrix block(stop - start, x.cols(), std::move(values));
      const LabelVector block_labels = argmax_rows(forward_eval<Activation>(model, block));
      std::copy(block_labels.begin(), block_labels.end(), labels.begin() + start);
    }
  });
  return labels;
}

// ---------------------------------------------------------------------------
// Checkpoint container (little-endian binary):
//   magic "IMBACKPT" | u32 format version | u64 input_dim | u64 hidden count |
//   u64 width per hidden layer | u64 num_classes |
//   per layer: fan_out*fan_in f64 weights (row-major), fan_out f64 biases
// Doubles are stored as their IEEE-754 bit patterns, so round trips are exact.
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'I', 'M', 'B', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw DataError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

inline void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }
inline double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

}  // namespace detail

inline void save_checkpoint(const MlpModel& model, std::ostream& out) {
  model.validate();
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  unsigned char version[4];
  for (int i = 0; i < 4; ++i) version[i] = static_cast<unsigned char>(kCheckpointVersion >> (8 * i));
  out.write(reinterpret_cast<const char*>(version), 4);
  detail::write_u64(out, model.input_dim);
  detail::write_u64(out, model.hidden_dims.size());
  for (std::size_t w : model.hidden_dims) detail::write_u64(out, w);
  detail::write_u64(out, model.num_classes);
  for (const auto& layer : model.layers) {
    for (double v : layer.weights.values()) detail::write_f64(out, v);
    for (double v : layer.bias) detail::write_f64(out, v);
  }
  if (!out) throw DataError("checkpoint: write failed");
}

inline MlpModel load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw DataError("checkpoint: bad magic; not a model checkpoint");
  }
  unsigned char version_bytes[4];
  if (!in.read(reinterpret_cast<char*>(version_bytes), 4)) throw DataError("checkpoint: truncated file");
  std::uint32_t version = 0;
  for (int i = 0; i < 4; ++i) version |= static_cast<std::uint32_t>(version_bytes[i]) << (8 * i);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported format version " + std::to_string(version));
  }
  constexpr std::uint64_t kMaxDim = 1ULL << 32;
  const std::uint64_t input_dim = detail::read_u64(in);
  const std::uint64_t hidden = detail::read_u64(in);
  if (input_dim > kMaxDim || hidden > 4096) throw DataError("checkpoint: implausible dimensions");
  std::vector<std::size_t> widths;
  for (std::uint64_t i = 0; i < hidden; ++i) {
    const std::uint64_t w = detail::read_u64(in);
    if (w > kMaxDim) throw DataError("checkpoint: implausible dimensions");
    widths.push_back(static_cast<std::size_t>(w));
  }
  const std::uint64_t classes = detail::read_u64(in);
  if (classes > kMaxDim) throw DataError("checkpoint: implausible dimensions");
  MlpModel model = MlpModel::zeros(input_dim, widths, classes);
  for (auto& layer : model.layers) {
    for (double& v : layer.weights.values()) v = detail::read_f64(in);
    for (double& v : layer.bias) v = detail::read_f64(in);
  }
  return model;
}

inline void save_checkpoint(const MlpModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot open " + path + " for writing");
  save_checkpoint(model, out);
}

inline MlpModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace imba_ids
