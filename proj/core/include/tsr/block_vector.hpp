#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace tsr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Shape of one fully connected layer. The stored weight block is
/// out_dim x (in_dim + 1); the extra last column holds the bias.
struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Throws ConfigError unless the specs are non-empty, positive and chained.
void validate_layer_chain(std::span<const LayerSpec> specs);

/// A weight-shaped quantity split into per-layer blocks. Used for weights,
/// gradients, search directions and optimizer accumulators alike.
///
/// Flattening order is layer-major, row-major within each block.
class BlockVector {
 public:
  BlockVector() = default;
  explicit BlockVector(std::vector<Matrix> blocks) : blocks_(std::move(blocks)) {}

  static BlockVector zeros(std::span<const LayerSpec> specs);
  static BlockVector zeros_like(const BlockVector& other);

  std::size_t num_blocks() const noexcept { return blocks_.size(); }
  const Matrix& block(std::size_t l) const { return blocks_.at(l); }
  Matrix& block(std::size_t l) { return blocks_.at(l); }
  const std::vector<Matrix>& blocks() const noexcept { return blocks_; }

  /// Total number of scalar entries.
  std::size_t size() const noexcept;
  bool same_shape(const BlockVector& other) const noexcept;
  bool all_finite() const noexcept;

  double dot(const BlockVector& other) const;
  double squared_norm() const;
  double norm() const;

  /// this += a * x
  BlockVector& axpy(double a, const BlockVector& x);
  BlockVector& operator+=(const BlockVector& other);
  BlockVector& operator-=(const BlockVector& other);
  BlockVector& operator*=(double s);

  Vector flatten() const;
  /// Inverse of flatten; `shape` supplies the block layout.
  static BlockVector unflatten(const BlockVector& shape, const Vector& flat);

 private:
  void require_same_shape(const BlockVector& other) const;

  std::vector<Matrix> blocks_;
};

BlockVector operator+(BlockVector a, const BlockVector& b);
BlockVector operator-(BlockVector a, const BlockVector& b);
BlockVector operator*(double s, BlockVector a);

}  // namespace tsr
