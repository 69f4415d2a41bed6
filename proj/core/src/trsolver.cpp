#include "tsr/trsolver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tsr/errors.hpp"

namespace tsr {

namespace {

constexpr int kMaxJacobiSweeps = 100;
constexpr int kMaxNewtonIterations = 200;
constexpr double kSecularRelTol = 1e-10;
constexpr double kAsymmetryTol = 1e-9;

// Eigen-coordinates view used by every restricted solve: the eigenvalues may
// differ from the decomposition's (saddle-free uses |lambda|).
struct Spectrum {
  const Vector& values;
  const Matrix& vectors;
  const Vector& r;
  const Vector& r_tilde;
  double threshold;
};

double phi(const Vector& values, const Vector& r_tilde, const std::vector<Eigen::Index>& active,
           double lambda) {
  double s = 0.0;
  for (Eigen::Index i : active) {
    const double d = values[i] + lambda;
    s += r_tilde[i] * r_tilde[i] / (d * d);
  }
  return s;
}

double phi_prime(const Vector& values, const Vector& r_tilde,
                 const std::vector<Eigen::Index>& active, double lambda) {
  double s = 0.0;
  for (Eigen::Index i : active) {
    const double d = values[i] + lambda;
    s += -2.0 * r_tilde[i] * r_tilde[i] / (d * d * d);
  }
  return s;
}

double secular_newton(const Vector& values, const Vector& r_tilde,
                      const std::vector<Eigen::Index>& active, double eps, double lambda_lb,
                      double lambda_init, std::vector<double>* iterates) {
  if (!(eps > 0.0)) throw ContractError("trust radius must be positive");
  if (!(lambda_init > lambda_lb)) {
    throw ContractError("Newton start must lie above the lower bound " + std::to_string(lambda_lb));
  }
  const double target = eps * eps;
  double lambda = lambda_init;
  double f = phi(values, r_tilde, active, lambda) - target;
  if (!(f > 0.0)) {
    throw ContractError("secular function is already below eps^2 at the start; "
                        "the interior solution applies");
  }
  if (iterates != nullptr) iterates->push_back(lambda);
  for (int it = 0; it < kMaxNewtonIterations; ++it) {
    if (std::abs(f) <= kSecularRelTol * target) return lambda;
    const double next = lambda - f / phi_prime(values, r_tilde, active, lambda);
    // Rounding can stall the iteration a hair short of the root.
    if (!(next > lambda)) return lambda;
    lambda = next;
    f = phi(values, r_tilde, active, lambda) - target;
    if (iterates != nullptr) iterates->push_back(lambda);
  }
  if (std::abs(f) <= kSecularRelTol * target) return lambda;
  throw NumericError("secular Newton iteration did not converge in " +
                     std::to_string(kMaxNewtonIterations) + " steps");
}

Vector combine(const Matrix& vectors, const std::vector<Eigen::Index>& idx, const Vector& coef) {
  Vector alpha = Vector::Zero(vectors.rows());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    alpha += coef[static_cast<Eigen::Index>(k)] * vectors.col(idx[k]);
  }
  return alpha;
}

double model_value(const Vector& values, const Vector& r_tilde,
                   const std::vector<Eigen::Index>& idx, const Vector& coef) {
  double q = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const double c = coef[static_cast<Eigen::Index>(k)];
    q += -r_tilde[idx[k]] * c + 0.5 * values[idx[k]] * c * c;
  }
  return q;
}

TRSolution finish(const Spectrum& s, const std::vector<Eigen::Index>& active, const Vector& coef,
                  double lambda, bool interior) {
  TRSolution sol;
  sol.alpha = combine(s.vectors, active, coef);
  sol.lambda = lambda;
  sol.interior = interior;
  sol.q_value = model_value(s.values, s.r_tilde, active, coef);
  return sol;
}

// Global minimizer of the model restricted to span{v_i : i in active}.
TRSolution solve_restricted(const Spectrum& s, const std::vector<Eigen::Index>& active, double eps,
                            double perturb_eps) {
  if (!(eps > 0.0)) throw ContractError("trust radius must be positive");
  const auto m = static_cast<Eigen::Index>(active.size());
  Eigen::Index lowest = active.front();
  for (Eigen::Index i : active) {
    if (s.values[i] < s.values[lowest]) lowest = i;
  }
  const double lo = s.values[lowest];
  Vector coef(m);

  // Positive definite restriction: Newton point if it fits, else boundary.
  if (lo > 0.0) {
    const double phi0 = phi(s.values, s.r_tilde, active, 0.0);
    if (phi0 <= eps * eps) {
      for (Eigen::Index k = 0; k < m; ++k) {
        const Eigen::Index i = active[static_cast<std::size_t>(k)];
        coef[k] = s.r_tilde[i] / s.values[i];
      }
      return finish(s, active, coef, 0.0, true);
    }
    const double lambda = secular_newton(s.values, s.r_tilde, active, eps, -lo, 0.0, nullptr);
    for (Eigen::Index k = 0; k < m; ++k) {
      const Eigen::Index i = active[static_cast<std::size_t>(k)];
      coef[k] = s.r_tilde[i] / (s.values[i] + lambda);
    }
    return finish(s, active, coef, lambda, false);
  }

  // Indefinite or semidefinite restriction: the solution is on the boundary
  // with lambda > -lo.
  std::vector<Eigen::Index> low;
  for (Eigen::Index i : active) {
    if (s.values[i] <= lo + s.threshold) low.push_back(i);
  }
  auto low_norm = [&](const Vector& rt) {
    double acc = 0.0;
    for (Eigen::Index i : low) acc += rt[i] * rt[i];
    return std::sqrt(acc);
  };

  Vector r_work = s.r;
  Vector rt_work = s.r_tilde;
  double g_low = low_norm(rt_work);
  if (g_low <= 1e-14 * std::max(1.0, s.r.norm())) {
    // Hard case: shift the gradient along the coordinate where v_lowest is largest.
    const double shift = perturb_eps >= 0.0 ? perturb_eps : default_perturbation(s.r);
    Eigen::Index k0 = 0;
    s.vectors.col(lowest).cwiseAbs().maxCoeff(&k0);
    r_work[k0] += shift;
    rt_work = s.vectors.transpose() * r_work;
    g_low = low_norm(rt_work);
  }

  const double floor_lambda = std::max(0.0, -lo);
  double lambda_init = -lo + g_low / (2.0 * eps);
  lambda_init = std::max(lambda_init, -lo + 1e-15 * std::max(1.0, std::abs(lo)));
  lambda_init = std::max(lambda_init, 0.0);
  if (g_low > 0.0 && lambda_init > -lo &&
      phi(s.values, rt_work, active, lambda_init) > eps * eps) {
    const double lambda = secular_newton(s.values, rt_work, active, eps, -lo, lambda_init, nullptr);
    for (Eigen::Index k = 0; k < m; ++k) {
      const Eigen::Index i = active[static_cast<std::size_t>(k)];
      coef[k] = rt_work[i] / (s.values[i] + lambda);
    }
    TRSolution sol = finish(s, active, coef, lambda, false);
    return sol;
  }

  // The root sits within rounding of the pole: closed-form hard-case step,
  // lambda = -lo and the remaining radius spent along v_lowest.
  double used = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index i = active[static_cast<std::size_t>(k)];
    const bool in_low = std::find(low.begin(), low.end(), i) != low.end();
    coef[k] = in_low ? 0.0 : rt_work[i] / (s.values[i] + floor_lambda);
    used += coef[k] * coef[k];
  }
  const auto pos = std::find(active.begin(), active.end(), lowest) - active.begin();
  const double sign = rt_work[lowest] < 0.0 ? -1.0 : 1.0;
  coef[pos] = sign * std::sqrt(std::max(0.0, eps * eps - used));
  return finish(s, active, coef, floor_lambda, false);
}

}  // namespace

QuadModel::QuadModel(Matrix b, Vector r) : b_(std::move(b)), r_(std::move(r)) {
  if (b_.rows() != b_.cols() || b_.rows() != r_.size()) {
    throw ContractError("model matrix and gradient sizes disagree");
  }
  if (!b_.allFinite() || !r_.allFinite()) throw NumericError("non-finite reduced model");
  const Matrix sym = 0.5 * (b_ + b_.transpose());
  b_ = sym;
}

double QuadModel::value(const Vector& alpha) const {
  return -r_.dot(alpha) + 0.5 * alpha.dot(b_ * alpha);
}

double EigenDecomp::positivity_threshold() const { return 1e-12 * std::max(1.0, b_norm); }

std::vector<Eigen::Index> EigenDecomp::positive_indices() const {
  std::vector<Eigen::Index> out;
  const double thr = positivity_threshold();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] > thr) out.push_back(i);
  }
  return out;
}

std::vector<Eigen::Index> EigenDecomp::negative_indices() const {
  std::vector<Eigen::Index> out;
  const double thr = positivity_threshold();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] < -thr) out.push_back(i);
  }
  return out;
}

EigenDecomp EigenDecomp::with_gradient(const Vector& new_r) const {
  if (new_r.size() != values.size()) throw ContractError("gradient size mismatch");
  EigenDecomp out = *this;
  out.r = new_r;
  out.r_tilde = vectors.transpose() * new_r;
  return out;
}

SymmetricEigen eigh_small(const Matrix& b, double tol) {
  if (b.rows() != b.cols()) throw ContractError("eigh_small needs a square matrix");
  if (b.rows() > 64) throw ContractError("eigh_small supports dimensions up to 64");
  if (!b.allFinite()) throw NumericError("non-finite matrix passed to eigh_small");
  const double norm = b.norm();
  if ((b - b.transpose()).norm() > kAsymmetryTol * std::max(norm, 1e-300)) {
    throw ContractError("matrix is not symmetric");
  }
  const Eigen::Index n = b.rows();
  Matrix a = 0.5 * (b + b.transpose());
  Matrix v = Matrix::Identity(n, n);

  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j) s += a(i, j) * a(i, j);
      }
    }
    return std::sqrt(s);
  };

  int sweep = 0;
  for (; sweep < kMaxJacobiSweeps && off_norm() > tol * norm; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        rotated = true;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
    if (!rotated) break;
  }
  if (off_norm() > tol * norm && sweep >= kMaxJacobiSweeps) {
    throw NumericError("Jacobi eigensolver did not converge");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return a(x, x) < a(y, y); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values[k] = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

EigenDecomp decompose(const QuadModel& model, double tol) {
  SymmetricEigen se = eigh_small(model.b(), tol);
  EigenDecomp eig;
  eig.values = std::move(se.values);
  eig.vectors = std::move(se.vectors);
  eig.r = model.r();
  eig.r_tilde = eig.vectors.transpose() * model.r();
  eig.b_norm = model.b().norm();
  return eig;
}

double default_perturbation(const Vector& r) { return 1e-8 * std::max(1.0, r.norm()); }

double newton_secular(const EigenDecomp& eig, const std::vector<Eigen::Index>& active, double eps,
                      double lambda_lb, double lambda_init, std::vector<double>* iterates) {
  if (active.empty()) throw ContractError("no active eigen-directions");
  bool any = false;
  for (Eigen::Index i : active) {
    if (i < 0 || i >= eig.dim()) throw ContractError("active index out of range");
    if (eig.r_tilde[i] != 0.0) any = true;
    if (!(eig.values[i] + lambda_init > 0.0)) {
      throw ContractError("Newton start is not above every active pole");
    }
  }
  if (!any) throw ContractError("reduced gradient vanishes on the active set");
  return secular_newton(eig.values, eig.r_tilde, active, eps, lambda_lb, lambda_init, iterates);
}

double positive_newton_norm(const EigenDecomp& eig) {
  double s = 0.0;
  for (Eigen::Index i : eig.positive_indices()) {
    const double c = eig.r_tilde[i] / eig.values[i];
    s += c * c;
  }
  return std::sqrt(s);
}

double absolute_newton_norm(const EigenDecomp& eig) {
  const double thr = eig.positivity_threshold();
  double s = 0.0;
  for (Eigen::Index i = 0; i < eig.dim(); ++i) {
    if (std::abs(eig.values[i]) > thr) {
      const double c = eig.r_tilde[i] / std::abs(eig.values[i]);
      s += c * c;
    }
  }
  return std::sqrt(s);
}

TRSolution solve_positive_subspace(const EigenDecomp& eig, double eps) {
  if (!(eps > 0.0)) throw ContractError("trust radius must be positive");
  const std::vector<Eigen::Index> active = eig.positive_indices();
  if (active.empty()) throw ContractError("model has no positive eigenvalue");
  const auto m = static_cast<Eigen::Index>(active.size());
  const Spectrum s{eig.values, eig.vectors, eig.r, eig.r_tilde, eig.positivity_threshold()};

  bool any = false;
  for (Eigen::Index i : active) any = any || eig.r_tilde[i] != 0.0;
  if (!any) return finish(s, active, Vector::Zero(m), 0.0, true);

  Vector coef(m);
  if (phi(eig.values, eig.r_tilde, active, 0.0) <= eps * eps) {
    for (Eigen::Index k = 0; k < m; ++k) {
      const Eigen::Index i = active[static_cast<std::size_t>(k)];
      coef[k] = eig.r_tilde[i] / eig.values[i];
    }
    return finish(s, active, coef, 0.0, true);
  }
  const double lambda = newton_secular(eig, active, eps, -eig.values[active.front()], 0.0);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index i = active[static_cast<std::size_t>(k)];
    coef[k] = eig.r_tilde[i] / (eig.values[i] + lambda);
  }
  return finish(s, active, coef, lambda, false);
}

TRSolution solve_full(const EigenDecomp& eig, double eps, double perturb_eps) {
  if (eig.dim() == 0) throw ContractError("empty model");
  std::vector<Eigen::Index> all(static_cast<std::size_t>(eig.dim()));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  const Spectrum s{eig.values, eig.vectors, eig.r, eig.r_tilde, eig.positivity_threshold()};
  return solve_restricted(s, all, eps, perturb_eps);
}

TRSolution solve_saddle_free(const EigenDecomp& eig, double eps) {
  if (eig.dim() == 0) throw ContractError("empty model");
  if (eig.values.cwiseAbs().maxCoeff() == 0.0) {
    throw DegenerateError("every eigenvalue is zero; saddle-free model is degenerate");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(eig.dim()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    return std::abs(eig.values[x]) < std::abs(eig.values[y]);
  });
  EigenDecomp abs_eig = eig;
  for (Eigen::Index k = 0; k < eig.dim(); ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    abs_eig.values[k] = std::abs(eig.values[src]);
    abs_eig.vectors.col(k) = eig.vectors.col(src);
    abs_eig.r_tilde[k] = eig.r_tilde[src];
  }
  return solve_full(abs_eig, eps);
}

TRSolution solve_negative_subspace(const EigenDecomp& eig, double eps, double perturb_eps) {
  const std::vector<Eigen::Index> active = eig.negative_indices();
  if (active.empty()) throw ContractError("model has no negative eigenvalue");
  const Spectrum s{eig.values, eig.vectors, eig.r, eig.r_tilde, eig.positivity_threshold()};
  return solve_restricted(s, active, eps, perturb_eps);
}

}  // namespace tsr
