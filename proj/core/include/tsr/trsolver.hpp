#pragma once

#include <cstddef>
#include <vector>

#include "tsr/block_vector.hpp"

namespace tsr {

/// Reduced model Q(alpha) = -r^T alpha + 1/2 alpha^T B alpha.
class QuadModel {
 public:
  QuadModel() = default;
  /// B is replaced by (B + B^T) / 2. Throws ContractError on size mismatch
  /// or non-finite input.
  QuadModel(Matrix b, Vector r);

  const Matrix& b() const noexcept { return b_; }
  const Vector& r() const noexcept { return r_; }
  Eigen::Index dim() const noexcept { return r_.size(); }

  double value(const Vector& alpha) const;

 private:
  Matrix b_;
  Vector r_;
};

/// Spectral form of a QuadModel: B = V diag(values) V^T with ascending values
/// and r_tilde = V^T r.
struct EigenDecomp {
  Vector values;
  Matrix vectors;
  Vector r;
  Vector r_tilde;
  double b_norm = 0.0;  // Frobenius norm of B

  Eigen::Index dim() const noexcept { return values.size(); }
  /// Eigenvalues above this count as positive.
  double positivity_threshold() const;
  /// Indices with values > positivity_threshold(), ascending.
  std::vector<Eigen::Index> positive_indices() const;
  /// Indices with values < -positivity_threshold(), ascending.
  std::vector<Eigen::Index> negative_indices() const;
  /// Same vectors with r replaced (r_tilde recomputed).
  EigenDecomp with_gradient(const Vector& new_r) const;
};

struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};

/// Dense symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Stops when the off-diagonal Frobenius norm is <= tol * ||B||_F.
/// Eigenvalues are returned in ascending order. Throws ContractError if B is
/// not square, larger than 64, or asymmetric beyond 1e-9 (relative).
SymmetricEigen eigh_small(const Matrix& b, double tol = 1e-14);

EigenDecomp decompose(const QuadModel& model, double tol = 1e-14);

struct TRSolution {
  Vector alpha;
  double lambda = 0.0;
  bool interior = false;
  double q_value = 0.0;
};

/// Default magnitude of the hard-case gradient perturbation.
double default_perturbation(const Vector& r);

/// Root of phi(lambda) = sum_{i in active} r_tilde_i^2 / (lambda_i + lambda)^2 = eps^2
/// by plain Newton iteration from lambda_init.
///
/// Requires lambda_init > lambda_lb and phi(lambda_init) > eps^2; since phi is
/// decreasing and convex the iterates then increase monotonically. Throws
/// ContractError when the start is not left of the root and NumericError
/// after 200 iterations. When `iterates` is given every iterate is appended.
double newton_secular(const EigenDecomp& eig, const std::vector<Eigen::Index>& active, double eps,
                      double lambda_lb, double lambda_init = 0.0,
                      std::vector<double>* iterates = nullptr);

/// Minimizer of Q over the span of positive-curvature eigenvectors within
/// ||alpha|| <= eps. Throws ContractError when no eigenvalue is positive.
TRSolution solve_positive_subspace(const EigenDecomp& eig, double eps);

/// Norm of the unconstrained minimizer on the positive subspace (0 if the
/// reduced gradient vanishes there).
double positive_newton_norm(const EigenDecomp& eig);

/// Global minimizer of Q over ||alpha|| <= eps, including the hard case.
/// A negative perturb_eps selects default_perturbation(r).
TRSolution solve_full(const EigenDecomp& eig, double eps, double perturb_eps = -1.0);

/// solve_full on the model whose eigenvalues are replaced by their absolute
/// values. Throws DegenerateError when every eigenvalue is zero.
TRSolution solve_saddle_free(const EigenDecomp& eig, double eps);

/// Minimizer of Q over the span of negative-curvature eigenvectors within
/// ||alpha|| <= eps. Throws ContractError when no eigenvalue is negative.
TRSolution solve_negative_subspace(const EigenDecomp& eig, double eps, double perturb_eps = -1.0);

/// Norm of sum_i r_tilde_i / |lambda_i| v_i over the nonzero eigenvalues.
double absolute_newton_norm(const EigenDecomp& eig);

}  // namespace tsr
