#pragma once

#ifndef EIGEN_DONT_PARALLELIZE
#define EIGEN_DONT_PARALLELIZE
#endif
#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "flsim/matrix.hpp"
#include "flsim/rng.hpp"

namespace flsim {

struct Hyperparams {
  double learning_rate = 0.1;
  std::size_t batch_size = 64;
  std::size_t epochs_per_round = 3;
};

template <typename Real>
struct Layer {
  DenseMatrix<Real> weights;  // out_dim x in_dim
  std::vector<Real> bias;     // out_dim

  bool operator==(const Layer&) const = default;
};

/// Dense MLP: rectifier hidden layers, softmax output.
template <typename Real>
struct Mlp {
  std::vector<std::size_t> layer_dims;  // input, hidden..., output
  std::vector<Layer<Real>> layers;

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.values.size() + l.bias.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& l : layers) {
      if (!l.weights.all_finite()) return false;
      for (const Real b : l.bias) {
        if (!std::isfinite(b)) return false;
      }
    }
    return true;
  }

  bool operator==(const Mlp&) const = default;
};

using MlpModel = Mlp<float>;

template <typename Real>
struct Gradients {
  std::vector<Layer<Real>> layers;  // same shapes as the model
};

namespace detail {

template <typename Real>
using EigenRowMajor =
    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Real>
Eigen::Map<EigenRowMajor<Real>> emap(DenseMatrix<Real>& m) {
  return {m.values.data(), static_cast<Eigen::Index>(m.rows),
          static_cast<Eigen::Index>(m.cols)};
}

template <typename Real>
Eigen::Map<const EigenRowMajor<Real>> emap(const DenseMatrix<Real>& m) {
  return {m.values.data(), static_cast<Eigen::Index>(m.rows),
          static_cast<Eigen::Index>(m.cols)};
}

template <typename Real>
Eigen::Map<const Eigen::Matrix<Real, 1, Eigen::Dynamic>> erow(
    const std::vector<Real>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

// Affine layer applied to a batch: out = in * W^T + bias per row.
template <typename Real>
DenseMatrix<Real> affine(const DenseMatrix<Real>& in, const Layer<Real>& layer) {
  DenseMatrix<Real> out(in.rows, layer.weights.rows);
  emap(out).noalias() = emap(in) * emap(layer.weights).transpose();
  emap(out).rowwise() += erow(layer.bias);
  return out;
}

// In-place softmax over each row, max-shifted for stability.
template <typename Real>
void softmax_rows(DenseMatrix<Real>& logits) {
  for (std::size_t r = 0; r < logits.rows; ++r) {
    Real* row = logits.row(r);
    Real mx = row[0];
    for (std::size_t c = 1; c < logits.cols; ++c) mx = std::max(mx, row[c]);
    Real sum = 0;
    for (std::size_t c = 0; c < logits.cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (std::size_t c = 0; c < logits.cols; ++c) row[c] /= sum;
  }
}

}  // namespace detail

/// Glorot-uniform weights from the seeded stream, zero biases.
/// Identical (layer_dims, seed) produce a bitwise-identical model.
template <typename Real = float>
Mlp<Real> init_model(const std::vector<std::size_t>& layer_dims,
                     std::uint64_t seed) {
  if (layer_dims.size() < 2)
    throw std::invalid_argument("init_model: need at least 2 layer dims");
  for (const std::size_t d : layer_dims) {
    if (d == 0) throw std::invalid_argument("init_model: zero layer dim");
  }
  Mlp<Real> model;
  model.layer_dims = layer_dims;
  SplitMix64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t fan_in = layer_dims[l];
    const std::size_t fan_out = layer_dims[l + 1];
    Layer<Real> layer;
    layer.weights = DenseMatrix<Real>(fan_out, fan_in);
    layer.bias.assign(fan_out, Real(0));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (Real& w : layer.weights.values)
      w = static_cast<Real>((2.0 * rng.next_double() - 1.0) * limit);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

/// Batched inference: one probability row per input row.
template <typename Real>
DenseMatrix<Real> forward(const Mlp<Real>& model,
                          const DenseMatrix<Real>& inputs) {
  if (inputs.cols != model.layer_dims.front())
    throw std::invalid_argument("forward: input width does not match model");
  DenseMatrix<Real> act = inputs;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    DenseMatrix<Real> z = detail::affine(act, model.layers[l]);
    if (l + 1 < model.layers.size()) {
      detail::emap(z) = detail::emap(z).cwiseMax(Real(0));
      act = std::move(z);
    } else {
      detail::softmax_rows(z);
      act = std::move(z);
    }
  }
  return act;
}

/// Mean cross-entropy loss and backprop gradients for one batch.
template <typename Real>
std::pair<Real, Gradients<Real>> loss_and_grads(
    const Mlp<Real>& model, const DenseMatrix<Real>& inputs,
    const std::vector<std::uint8_t>& labels) {
  if (inputs.rows == 0) throw std::invalid_argument("loss_and_grads: empty batch");
  if (inputs.rows != labels.size())
    throw std::invalid_argument("loss_and_grads: batch/label size mismatch");
  if (inputs.cols != model.layer_dims.front())
    throw std::invalid_argument("loss_and_grads: input width mismatch");
  const std::size_t classes = model.layer_dims.back();
  for (const std::uint8_t y : labels) {
    if (y >= classes) throw std::invalid_argument("loss_and_grads: label out of range");
  }

  const std::size_t n = inputs.rows;
  const std::size_t depth = model.layers.size();

  // Forward, keeping each layer's post-activation input.
  std::vector<DenseMatrix<Real>> acts;
  acts.reserve(depth + 1);
  acts.push_back(inputs);
  for (std::size_t l = 0; l < depth; ++l) {
    DenseMatrix<Real> z = detail::affine(acts.back(), model.layers[l]);
    if (l + 1 < depth) detail::emap(z) = detail::emap(z).cwiseMax(Real(0));
    acts.push_back(std::move(z));
  }

  // Loss from the output logits via log-sum-exp; delta = softmax - onehot.
  DenseMatrix<Real>& logits = acts.back();
  double loss_sum = 0;
  for (std::size_t r = 0; r < n; ++r) {
    Real* row = logits.row(r);
    Real mx = row[0];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    double sum = 0;
    for (std::size_t c = 0; c < classes; ++c)
      sum += std::exp(static_cast<double>(row[c] - mx));
    const double lse = static_cast<double>(mx) + std::log(sum);
    loss_sum += lse - static_cast<double>(row[labels[r]]);
    for (std::size_t c = 0; c < classes; ++c)
      row[c] = static_cast<Real>(
          std::exp(static_cast<double>(row[c]) - lse));
  }
  DenseMatrix<Real> delta = std::move(logits);
  const Real inv_n = Real(1) / static_cast<Real>(n);
  for (std::size_t r = 0; r < n; ++r) delta.at(r, labels[r]) -= Real(1);
  detail::emap(delta) *= inv_n;

  Gradients<Real> grads;
  grads.layers.resize(depth);
  for (std::size_t li = depth; li-- > 0;) {
    const Layer<Real>& layer = model.layers[li];
    Layer<Real>& g = grads.layers[li];
    g.weights = DenseMatrix<Real>(layer.weights.rows, layer.weights.cols);
    g.bias.assign(layer.bias.size(), Real(0));
    detail::emap(g.weights).noalias() =
        detail::emap(delta).transpose() * detail::emap(acts[li]);
    Eigen::Map<Eigen::Matrix<Real, 1, Eigen::Dynamic>> gb(
        g.bias.data(), static_cast<Eigen::Index>(g.bias.size()));
    gb = detail::emap(delta).colwise().sum();
    if (li > 0) {
      DenseMatrix<Real> prev(delta.rows, layer.weights.cols);
      detail::emap(prev).noalias() = detail::emap(delta) * detail::emap(layer.weights);
      // Rectifier derivative from the stored activation (a > 0 iff z > 0).
      detail::emap(prev) =
          (detail::emap(acts[li]).array() > Real(0))
              .select(detail::emap(prev), Real(0));
      delta = std::move(prev);
    }
  }
  return {static_cast<Real>(loss_sum / static_cast<double>(n)), std::move(grads)};
}

template <typename Real>
void sgd_step(Mlp<Real>& model, const Gradients<Real>& grads, Real lr) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    detail::emap(model.layers[l].weights) -=
        lr * detail::emap(grads.layers[l].weights);
    for (std::size_t i = 0; i < model.layers[l].bias.size(); ++i)
      model.layers[l].bias[i] -= lr * grads.layers[l].bias[i];
  }
}

/// Mini-batch SGD over the given sample subset. Batch order is a seeded
/// Fisher-Yates shuffle per epoch; the whole routine is a pure function of
/// its inputs. Returns the trained model and one mean loss per epoch.
template <typename Real>
std::pair<Mlp<Real>, std::vector<double>> train_local(
    Mlp<Real> model, const DenseMatrix<Real>& images,
    const std::vector<std::uint8_t>& labels,
    const std::vector<std::uint32_t>& subset, const Hyperparams& hyper,
    SplitMix64& rng) {
  if (subset.empty()) throw std::invalid_argument("train_local: empty dataset part");
  if (hyper.batch_size == 0) throw std::invalid_argument("train_local: batch_size 0");
  std::vector<double> trace;
  std::vector<std::uint32_t> order(subset);
  const std::size_t width = images.cols;
  for (std::size_t epoch = 0; epoch < hyper.epochs_per_round; ++epoch) {
    fisher_yates_shuffle(order, rng);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t bn = std::min(hyper.batch_size, order.size() - start);
      DenseMatrix<Real> batch(bn, width);
      std::vector<std::uint8_t> batch_labels(bn);
      for (std::size_t i = 0; i < bn; ++i) {
        const std::uint32_t src = order[start + i];
        const Real* from = images.row(src);
        std::copy(from, from + width, batch.row(i));
        batch_labels[i] = labels[src];
      }
      auto [loss, grads] = loss_and_grads(model, batch, batch_labels);
      sgd_step(model, grads, static_cast<Real>(hyper.learning_rate));
      loss_sum += static_cast<double>(loss) * static_cast<double>(bn);
    }
    trace.push_back(loss_sum / static_cast<double>(order.size()));
  }
  return {std::move(model), std::move(trace)};
}

/// Deterministic compute-cost proxy: forward ~2 FLOPs and backward ~4 FLOPs
/// per parameter per sample.
inline std::uint64_t flop_count(std::size_t param_count,
                                std::uint64_t n_samples,
                                std::uint64_t epochs) {
  return 6ull * static_cast<std::uint64_t>(param_count) * n_samples * epochs;
}

template <typename Real>
std::uint64_t flop_count(const Mlp<Real>& model, std::uint64_t n_samples,
                         std::uint64_t epochs) {
  return flop_count(model.param_count(), n_samples, epochs);
}

}  // namespace flsim
