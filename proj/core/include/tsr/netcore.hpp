#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tsr/block_vector.hpp"

namespace tsr {

/// Weights of a tanh/softmax feed-forward classifier.
///
/// Block l is out_dim x (in_dim + 1); its last column is the bias. Hidden
/// layers use tanh, the last layer feeds a softmax.
class NetParams {
 public:
  NetParams() = default;
  /// Throws ConfigError if fewer than two layers or the blocks do not chain.
  explicit NetParams(BlockVector weights);

  static NetParams zeros(std::span<const LayerSpec> specs);

  std::size_t num_layers() const noexcept { return weights_.num_blocks(); }
  std::size_t num_params() const noexcept { return weights_.size(); }
  std::size_t input_dim() const { return spec(0).in_dim; }
  std::size_t num_classes() const { return spec(num_layers() - 1).out_dim; }
  LayerSpec spec(std::size_t l) const;
  std::vector<LayerSpec> specs() const;

  const BlockVector& weights() const noexcept { return weights_; }
  /// Mutable access; callers must preserve the block shapes.
  BlockVector& weights() noexcept { return weights_; }
  const Matrix& layer(std::size_t l) const { return weights_.block(l); }

 private:
  BlockVector weights_;
};

/// Samples are rows of `inputs`; `targets` holds class indices.
/// `source_index` optionally records where each row came from in a dataset.
struct Batch {
  Matrix inputs;
  std::vector<int> targets;
  std::vector<std::size_t> source_index;

  std::size_t size() const noexcept { return targets.size(); }
};

struct LossConfig {
  double reg_coeff = 1e-4;
  bool regularize_bias = false;
};

/// Intermediates of one forward pass. Matrices are units x samples.
struct ForwardTrace {
  std::vector<Matrix> pre;   // a^0 .. a^{L-1}
  std::vector<Matrix> post;  // tanh(a^0) .. tanh(a^{L-2})
  Matrix softmax;            // y, classes x samples
  Vector sample_loss;        // -log y[target] per sample
  double data_loss = 0.0;
  double reg_loss = 0.0;
  double loss = 0.0;
};

/// Back-propagated sensitivities of the mean data loss (no regularizer).
/// delta_pre[l] = dE/da^l, delta_post[l] = dE/dz^l for hidden layers.
struct BackwardTrace {
  std::vector<Matrix> delta_pre;
  std::vector<Matrix> delta_post;
};

/// Each unit gets exactly min(nnz_per_unit, in_dim) nonzero incoming weights
/// drawn from N(0, scale^2); biases are zero.
NetParams init_sparse(std::span<const LayerSpec> specs, std::uint64_t seed,
                      std::size_t nnz_per_unit = 15, double scale = 1.0);

/// Dense N(0, scale^2) weights with zero biases.
NetParams init_gaussian(std::span<const LayerSpec> specs, std::uint64_t seed, double scale);

/// Mean cross-entropy over the batch plus reg_coeff * ||w_reg||^2.
ForwardTrace forward(const NetParams& params, const Batch& batch, const LossConfig& cfg);

/// Bit-identical to forward(...).loss without keeping intermediates.
double loss_only(const NetParams& params, const Batch& batch, const LossConfig& cfg);

BackwardTrace backpropagate(const NetParams& params, const ForwardTrace& trace, const Batch& batch);

/// Exact gradient of the regularized mean loss.
BlockVector backward(const NetParams& params, const ForwardTrace& trace, const Batch& batch,
                     const LossConfig& cfg);

/// Convenience: forward + backward.
struct LossAndGradient {
  double loss = 0.0;
  BlockVector gradient;
};
LossAndGradient loss_and_gradient(const NetParams& params, const Batch& batch,
                                  const LossConfig& cfg);

/// Fraction of samples whose argmax prediction equals the target.
double accuracy(const NetParams& params, const Batch& batch);

/// Sum of squares of the regularized coordinates.
double regularized_squared_norm(const NetParams& params, const LossConfig& cfg);

/// 1 on regularized coordinates, 0 elsewhere.
BlockVector regularization_mask(const NetParams& params, const LossConfig& cfg);

}  // namespace tsr
