#include "tsr/block_vector.hpp"

#include <cmath>
#include <string>

#include "tsr/errors.hpp"

namespace tsr {

void validate_layer_chain(std::span<const LayerSpec> specs) {
  if (specs.empty()) throw ConfigError("network needs at least one layer");
  for (std::size_t l = 0; l < specs.size(); ++l) {
    if (specs[l].in_dim == 0 || specs[l].out_dim == 0) {
      throw ConfigError("layer " + std::to_string(l) + " has a zero dimension");
    }
    if (l + 1 < specs.size() && specs[l].out_dim != specs[l + 1].in_dim) {
      throw ConfigError("layer " + std::to_string(l) + " outputs " +
                        std::to_string(specs[l].out_dim) + " units but layer " +
                        std::to_string(l + 1) + " expects " + std::to_string(specs[l + 1].in_dim));
    }
  }
}

BlockVector BlockVector::zeros(std::span<const LayerSpec> specs) {
  std::vector<Matrix> blocks;
  blocks.reserve(specs.size());
  for (const LayerSpec& s : specs) {
    blocks.push_back(Matrix::Zero(static_cast<Eigen::Index>(s.out_dim),
                                  static_cast<Eigen::Index>(s.in_dim + 1)));
  }
  return BlockVector(std::move(blocks));
}

BlockVector BlockVector::zeros_like(const BlockVector& other) {
  std::vector<Matrix> blocks;
  blocks.reserve(other.num_blocks());
  for (const Matrix& b : other.blocks_) blocks.push_back(Matrix::Zero(b.rows(), b.cols()));
  return BlockVector(std::move(blocks));
}

std::size_t BlockVector::size() const noexcept {
  std::size_t n = 0;
  for (const Matrix& b : blocks_) n += static_cast<std::size_t>(b.size());
  return n;
}

bool BlockVector::same_shape(const BlockVector& other) const noexcept {
  if (blocks_.size() != other.blocks_.size()) return false;
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    if (blocks_[l].rows() != other.blocks_[l].rows() ||
        blocks_[l].cols() != other.blocks_[l].cols()) {
      return false;
    }
  }
  return true;
}

bool BlockVector::all_finite() const noexcept {
  for (const Matrix& b : blocks_) {
    if (!b.allFinite()) return false;
  }
  return true;
}

void BlockVector::require_same_shape(const BlockVector& other) const {
  if (!same_shape(other)) throw ContractError("block vectors have different shapes");
}

double BlockVector::dot(const BlockVector& other) const {
  require_same_shape(other);
  double s = 0.0;
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    s += blocks_[l].cwiseProduct(other.blocks_[l]).sum();
  }
  return s;
}

double BlockVector::squared_norm() const {
  double s = 0.0;
  for (const Matrix& b : blocks_) s += b.squaredNorm();
  return s;
}

double BlockVector::norm() const { return std::sqrt(squared_norm()); }

BlockVector& BlockVector::axpy(double a, const BlockVector& x) {
  require_same_shape(x);
  for (std::size_t l = 0; l < blocks_.size(); ++l) blocks_[l] += a * x.blocks_[l];
  return *this;
}

BlockVector& BlockVector::operator+=(const BlockVector& other) {
  require_same_shape(other);
  for (std::size_t l = 0; l < blocks_.size(); ++l) blocks_[l] += other.blocks_[l];
  return *this;
}

BlockVector& BlockVector::operator-=(const BlockVector& other) {
  require_same_shape(other);
  for (std::size_t l = 0; l < blocks_.size(); ++l) blocks_[l] -= other.blocks_[l];
  return *this;
}

BlockVector& BlockVector::operator*=(double s) {
  for (Matrix& b : blocks_) b *= s;
  return *this;
}

Vector BlockVector::flatten() const {
  Vector flat(static_cast<Eigen::Index>(size()));
  Eigen::Index k = 0;
  for (const Matrix& b : blocks_) {
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
      for (Eigen::Index j = 0; j < b.cols(); ++j) flat[k++] = b(i, j);
    }
  }
  return flat;
}

BlockVector BlockVector::unflatten(const BlockVector& shape, const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != shape.size()) {
    throw ContractError("flat vector length does not match block layout");
  }
  BlockVector out = zeros_like(shape);
  Eigen::Index k = 0;
  for (Matrix& b : out.blocks_) {
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
      for (Eigen::Index j = 0; j < b.cols(); ++j) b(i, j) = flat[k++];
    }
  }
  return out;
}

BlockVector operator+(BlockVector a, const BlockVector& b) { return a += b; }
BlockVector operator-(BlockVector a, const BlockVector& b) { return a -= b; }
BlockVector operator*(double s, BlockVector a) { return a *= s; }

}  // namespace tsr
