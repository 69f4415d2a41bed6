#include "tsr/hvp.hpp"

#include <string>

#include "tsr/errors.hpp"

namespace tsr {

CurvatureContext::CurvatureContext(const NetParams& params, const Batch& batch,
                                   const LossConfig& cfg)
    : params_(&params),
      batch_(&batch),
      cfg_(cfg),
      trace_(forward(params, batch, cfg)),
      deltas_(backpropagate(params, trace_, batch)) {}

BlockVector hvp_block(const CurvatureContext& ctx, const BlockDirection& dir,
                      HvpCounters* counters) {
  const NetParams& params = ctx.params();
  const Batch& batch = ctx.batch();
  const ForwardTrace& tr = ctx.trace();
  const BackwardTrace& bt = ctx.deltas();
  const std::size_t num_layers = params.num_layers();
  const std::size_t l0 = dir.layer;
  if (l0 >= num_layers) throw ContractError("direction layer out of range");
  const Matrix& v = dir.block;
  const Matrix& w0 = params.layer(l0);
  if (v.rows() != w0.rows() || v.cols() != w0.cols()) {
    throw ContractError("direction block shape does not match layer " + std::to_string(l0));
  }
  if (!v.allFinite()) throw NumericError("non-finite direction", l0);
  if (counters != nullptr) counters->r_forward_visits.resize(num_layers, 0);

  const Eigen::Index v_in = v.cols() - 1;

  // R-forward from l0: Ra^l, Rz^l for l >= l0.
  std::vector<Matrix> r_pre(num_layers);
  std::vector<Matrix> r_post(num_layers > 0 ? num_layers - 1 : 0);
  if (l0 == 0) {
    r_pre[0] = v.leftCols(v_in) * batch.inputs.transpose();
  } else {
    r_pre[l0] = v.leftCols(v_in) * tr.post[l0 - 1];
  }
  r_pre[l0].colwise() += v.col(v_in);
  if (counters != nullptr) ++counters->r_forward_visits[l0];
  for (std::size_t l = l0; l + 1 < num_layers; ++l) {
    const auto& z = tr.post[l].array();
    r_post[l] = ((1.0 - z.square()) * r_pre[l].array()).matrix();
    const Matrix& w = params.layer(l + 1);
    r_pre[l + 1] = w.leftCols(w.cols() - 1) * r_post[l];
    if (counters != nullptr) ++counters->r_forward_visits[l + 1];
  }

  // Softmax/CE curvature on the output pre-activations: y*Ra - (y^T Ra) y.
  const Matrix& y = tr.softmax;
  const Matrix& r_out = r_pre[num_layers - 1];
  const Eigen::RowVectorXd p = y.cwiseProduct(r_out).colwise().sum();
  Matrix r_delta = y.cwiseProduct(r_out) - y * p.asDiagonal();
  r_delta /= static_cast<double>(batch.size());
  if (!r_delta.allFinite()) throw NumericError("non-finite output curvature product", num_layers - 1);

  BlockVector hv = BlockVector::zeros_like(params.weights());
  for (std::size_t l = num_layers; l-- > 0;) {
    Matrix& h = hv.block(l);
    const Eigen::Index in = h.cols() - 1;
    if (l == 0) {
      h.leftCols(in) = r_delta * batch.inputs;
    } else {
      h.leftCols(in) = r_delta * tr.post[l - 1].transpose();
      if (l - 1 >= l0) h.leftCols(in) += bt.delta_pre[l] * r_post[l - 1].transpose();
    }
    h.col(in) = r_delta.rowwise().sum();
    if (l == 0) break;

    const Matrix& w = params.layer(l);
    Matrix r_dpost = w.leftCols(in).transpose() * r_delta;
    if (l == l0) r_dpost += v.leftCols(v_in).transpose() * bt.delta_pre[l];
    const auto& z = tr.post[l - 1].array();
    const auto slope = 1.0 - z.square();
    Matrix next = (slope * r_dpost.array()).matrix();
    if (l - 1 >= l0) {
      // tanh'' = -2 z (1 - z^2)
      next.array() += -2.0 * z * slope * r_pre[l - 1].array() * bt.delta_post[l - 1].array();
    }
    r_delta = std::move(next);
  }

  const LossConfig& cfg = ctx.config();
  if (cfg.reg_coeff != 0.0) {
    Matrix& h = hv.block(l0);
    if (cfg.regularize_bias) {
      h += 2.0 * cfg.reg_coeff * v;
    } else {
      h.leftCols(v_in) += 2.0 * cfg.reg_coeff * v.leftCols(v_in);
    }
  }
  if (!hv.all_finite()) throw NumericError("non-finite Hessian-vector product", l0);
  return hv;
}

BlockVector hvp_block(const NetParams& params, const Batch& batch, const LossConfig& cfg,
                      const BlockDirection& dir) {
  const CurvatureContext ctx(params, batch, cfg);
  return hvp_block(ctx, dir);
}

BlockVector hvp_full(const CurvatureContext& ctx, const BlockVector& v) {
  const BlockVector& w = ctx.params().weights();
  if (!v.same_shape(w)) throw ContractError("vector is not shaped like the network");
  BlockVector out = BlockVector::zeros_like(w);
  for (std::size_t l = 0; l < v.num_blocks(); ++l) {
    out += hvp_block(ctx, BlockDirection{l, v.block(l)});
  }
  return out;
}

BlockVector hvp_full(const NetParams& params, const Batch& batch, const LossConfig& cfg,
                     const BlockVector& v) {
  const CurvatureContext ctx(params, batch, cfg);
  return hvp_full(ctx, v);
}

}  // namespace tsr
