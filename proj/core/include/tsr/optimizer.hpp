#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsr/block_vector.hpp"
#include "tsr/netcore.hpp"
#include "tsr/trsolver.hpp"

namespace tsr {

enum class StrategyKind {
  TwoStage,
  TrustRegionClassic,
  OnlyPositive,
  SaddleFree,
  PositiveNegative,
  NegativePositive,
};

std::string_view to_string(StrategyKind kind);
/// Accepts the canonical names returned by to_string (case-insensitive) plus
/// the short forms "two-stage", "trust-region", "only-positive", "saddle-free",
/// "positive-negative", "negative-positive". Throws ConfigError otherwise.
StrategyKind parse_strategy(std::string_view name);
std::vector<StrategyKind> all_strategies();

/// One column of the per-layer subspace: nonzero only in `layer`.
/// kind 0 comes from the gradient, kind 1 from the previous step.
struct BasisColumn {
  std::size_t layer = 0;
  int kind = 0;
  Matrix block;
};

/// Columns ordered gradient-derived first (by layer), then step-derived.
struct SubspaceBasis {
  std::vector<BasisColumn> columns;
  std::vector<int> layer_column_count;

  Eigen::Index dim() const noexcept { return static_cast<Eigen::Index>(columns.size()); }
};

/// Per-layer Gram-Schmidt of {grad^l, prev_step^l}. A vector is dropped when
/// its norm is <= 1e-300 or its residual after projection is <= 1e-10 of its
/// norm. Throws DegenerateError if no layer keeps a column.
SubspaceBasis build_basis(const BlockVector& grad, const BlockVector& prev_step);

/// V * alpha, shaped like `shape`.
BlockVector apply_basis(const SubspaceBasis& basis, const Vector& alpha, const BlockVector& shape);
/// V^T * v.
Vector project(const SubspaceBasis& basis, const BlockVector& v);
/// Largest entry of |V^T V - I|.
double orthonormality_error(const SubspaceBasis& basis);

/// Reduced model B = V^T H V, r = V^T grad. The Hessian products for columns
/// living in layer l are taken on subbatches[l].
QuadModel assemble_model(const NetParams& params, const SubspaceBasis& basis,
                         const BlockVector& grad, std::span<const Batch> subbatches,
                         const LossConfig& cfg);

/// Loss probe at trial weights.
using Evaluator = std::function<double(const BlockVector&)>;

/// Evaluator computing loss_only on a fixed batch.
Evaluator minibatch_evaluator(const Batch& batch, const LossConfig& cfg);

struct OptimizerOptions {
  int max_halvings = 50;
  /// Bootstrap step factor: w1 = w0 - eps0 * g0.
  double eps0 = 0.01;
};

/// Outcome of one backtracking/linesearch stage.
struct StageResult {
  BlockVector weights;
  bool executed = false;
  int backtracks = 0;
  double radius = 0.0;
  double loss = 0.0;
  Vector alpha;
};

/// Trust-region stage on the positive-curvature subspace. The first probe is
/// the unconstrained positive-subspace minimizer; on failure the radius is
/// halved (at most max_halvings times), after a success it is shrunk by 0.7
/// while that strictly improves the loss. Skipped when no eigenvalue is
/// positive or the reduced gradient vanishes there.
StageResult stage_positive(const BlockVector& weights, const SubspaceBasis& basis,
                           const EigenDecomp& eig, const Evaluator& evaluator,
                           double current_loss, int max_halvings);

/// Same schedule as stage_positive for an arbitrary radius -> solution map.
StageResult stage_trust_region(const BlockVector& weights, const SubspaceBasis& basis,
                               const std::function<TRSolution(double)>& solve,
                               double initial_radius, const Evaluator& evaluator,
                               double current_loss, int max_halvings);

struct GradientStageResult {
  BlockVector weights;
  bool executed = false;
  int halvings = 0;
  double delta1 = 0.0;  // step length carried to the next iteration
  double step = 0.0;    // committed step length (0 when skipped)
  double loss = 0.0;
};

/// Linesearch along -grad/||grad|| starting at length delta1: halve until the
/// loss strictly drops then shrink by 0.7 while improving, or, when the first
/// probe already improves, grow by 1.3 while improving. On failure the
/// weights are unchanged and delta1 is halved once.
GradientStageResult stage_gradient(const BlockVector& weights, const BlockVector& grad,
                                   double delta1, const Evaluator& evaluator,
                                   double current_loss, int max_halvings);

/// Same linesearch for a step that depends on a length (used for the
/// negative-curvature stage of the mixed variants).
GradientStageResult stage_linesearch(const BlockVector& weights,
                                     const std::function<BlockVector(double)>& step,
                                     double delta1, const Evaluator& evaluator,
                                     double current_loss, int max_halvings);

struct TwoStageState {
  NetParams params;
  NetParams prev_params;
  double delta1 = 0.0;
  std::size_t iteration = 0;
  std::mt19937_64 rng;
};

struct StepReport {
  StrategyKind strategy = StrategyKind::TwoStage;
  bool model_built = false;
  Eigen::Index basis_dim = 0;
  double orthonormality_error = 0.0;
  bool stage1_executed = false;
  int stage1_backtracks = 0;
  double stage1_radius = 0.0;
  /// g^T V alpha for the committed stage-1 step (0 when skipped).
  double stage1_descent = 0.0;
  bool stage2_executed = false;
  double stage2_step = 0.0;
  double loss_before = 0.0;
  double loss_after_stage1 = 0.0;
  double loss_after_stage2 = 0.0;
  double eig_min = 0.0;
  double eig_max = 0.0;
};

/// w1 = w0 - eps0 * g0(w0), delta1 = eps0 * ||g0||. Throws DegenerateError on
/// a zero initial gradient.
TwoStageState bootstrap(const NetParams& params0, const Batch& minibatch, double eps0,
                        const LossConfig& cfg, std::uint64_t seed = 0);

/// One iteration of the two-stage method: positive-curvature trust-region
/// step, gradient recomputation, then the gradient linesearch step.
StepReport two_stage_iterate(TwoStageState& state, const Batch& minibatch,
                             std::span<const Batch> subbatches, const LossConfig& cfg,
                             const OptimizerOptions& options = {});

/// One iteration of any of the six curvature-handling strategies.
StepReport variant_iterate(StrategyKind strategy, TwoStageState& state, const Batch& minibatch,
                           std::span<const Batch> subbatches, const LossConfig& cfg,
                           const OptimizerOptions& options = {});

}  // namespace tsr
