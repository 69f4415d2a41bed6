#pragma once

#include <cstddef>
#include <vector>

#include "tsr/block_vector.hpp"
#include "tsr/netcore.hpp"

namespace tsr {

/// A direction that is nonzero in exactly one layer block.
struct BlockDirection {
  std::size_t layer = 0;
  Matrix block;
};

/// Forward and backward intermediates of one (params, batch) pair, shared by
/// every Hessian-vector product taken on that batch.
///
/// Holds references: `params` and `batch` must outlive the context.
class CurvatureContext {
 public:
  CurvatureContext(const NetParams& params, const Batch& batch, const LossConfig& cfg);

  const NetParams& params() const noexcept { return *params_; }
  const Batch& batch() const noexcept { return *batch_; }
  const LossConfig& config() const noexcept { return cfg_; }
  const ForwardTrace& trace() const noexcept { return trace_; }
  const BackwardTrace& deltas() const noexcept { return deltas_; }

 private:
  const NetParams* params_;
  const Batch* batch_;
  LossConfig cfg_;
  ForwardTrace trace_;
  BackwardTrace deltas_;
};

/// Instrumentation: how often each layer was visited by an R-forward sweep.
struct HvpCounters {
  std::vector<std::size_t> r_forward_visits;
};

/// Exact H * v for v nonzero only in `dir.layer`, via the R-operator.
///
/// The R-forward sweep starts at dir.layer and never touches earlier layers.
/// The softmax/cross-entropy curvature is applied in closed form and the
/// R-backward sweep keeps the tanh second-derivative term, so this is the
/// full Hessian rather than a Gauss-Newton approximation.
BlockVector hvp_block(const CurvatureContext& ctx, const BlockDirection& dir,
                      HvpCounters* counters = nullptr);

BlockVector hvp_block(const NetParams& params, const Batch& batch, const LossConfig& cfg,
                      const BlockDirection& dir);

/// H * v as the sum of per-layer block products.
BlockVector hvp_full(const CurvatureContext& ctx, const BlockVector& v);

BlockVector hvp_full(const NetParams& params, const Batch& batch, const LossConfig& cfg,
                     const BlockVector& v);

}  // namespace tsr
