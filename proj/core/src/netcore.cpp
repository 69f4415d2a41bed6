#include "tsr/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "tsr/errors.hpp"

namespace tsr {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

// W.leftCols(in) * prev + bias, identical arithmetic for every caller.
template <typename Prev>
Matrix affine(const Matrix& w, const Prev& prev) {
  const Eigen::Index in = w.cols() - 1;
  Matrix a = w.leftCols(in) * prev;
  a.colwise() += w.col(in);
  return a;
}

void check_finite(const Matrix& a, std::size_t layer) {
  if (!a.allFinite()) {
    throw NumericError("non-finite pre-activation in layer " + std::to_string(layer), layer);
  }
}

void check_batch(const NetParams& params, const Batch& batch) {
  if (batch.size() == 0) throw ContractError("batch is empty");
  if (static_cast<std::size_t>(batch.inputs.rows()) != batch.size()) {
    throw ContractError("batch has " + std::to_string(batch.inputs.rows()) + " input rows but " +
                        std::to_string(batch.size()) + " targets");
  }
  if (static_cast<std::size_t>(batch.inputs.cols()) != params.input_dim()) {
    throw ContractError("batch input dimension " + std::to_string(batch.inputs.cols()) +
                        " does not match network input " + std::to_string(params.input_dim()));
  }
  const int classes = static_cast<int>(params.num_classes());
  for (int t : batch.targets) {
    if (t < 0 || t >= classes) {
      throw ContractError("target " + std::to_string(t) + " outside [0, " +
                          std::to_string(classes) + ")");
    }
  }
}

// Column-wise log-sum-exp cross entropy; optionally writes the softmax.
Vector cross_entropy(const Matrix& logits, const std::vector<int>& targets, Matrix* softmax) {
  const Eigen::Index n = logits.cols();
  Vector losses(n);
  if (softmax != nullptr) softmax->resize(logits.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto col = logits.col(j);
    const double m = col.maxCoeff();
    const double s = (col.array() - m).unaryExpr([](double x) { return std::exp(x); }).sum();
    const double lse = m + std::log(s);
    losses[j] = lse - col[targets[static_cast<std::size_t>(j)]];
    if (softmax != nullptr) {
      softmax->col(j) = (col.array() - lse).unaryExpr([](double x) { return std::exp(x); }).matrix();
    }
  }
  return losses;
}

double mean_in_order(const Vector& v) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += v[i];
  return s / static_cast<double>(v.size());
}

}  // namespace

NetParams::NetParams(BlockVector weights) : weights_(std::move(weights)) {
  if (weights_.num_blocks() < 2) throw ConfigError("network needs at least two layers");
  std::vector<LayerSpec> s;
  for (const Matrix& b : weights_.blocks()) {
    if (b.cols() < 2 || b.rows() < 1) throw ConfigError("weight block too small");
    s.push_back({static_cast<std::size_t>(b.cols() - 1), static_cast<std::size_t>(b.rows())});
  }
  validate_layer_chain(s);
}

NetParams NetParams::zeros(std::span<const LayerSpec> specs) {
  validate_layer_chain(specs);
  return NetParams(BlockVector::zeros(specs));
}

LayerSpec NetParams::spec(std::size_t l) const {
  const Matrix& b = weights_.block(l);
  return {static_cast<std::size_t>(b.cols() - 1), static_cast<std::size_t>(b.rows())};
}

std::vector<LayerSpec> NetParams::specs() const {
  std::vector<LayerSpec> s;
  for (std::size_t l = 0; l < num_layers(); ++l) s.push_back(spec(l));
  return s;
}

NetParams init_sparse(std::span<const LayerSpec> specs, std::uint64_t seed,
                      std::size_t nnz_per_unit, double scale) {
  validate_layer_chain(specs);
  if (specs.size() < 2) throw ConfigError("network needs at least two layers");
  if (nnz_per_unit == 0) throw ConfigError("nnz_per_unit must be positive");
  if (!(scale > 0.0)) throw ConfigError("init scale must be positive");
  std::size_t max_in = 0;
  for (const LayerSpec& s : specs) max_in = std::max(max_in, s.in_dim);
  if (nnz_per_unit > max_in) {
    throw ConfigError("nnz_per_unit " + std::to_string(nnz_per_unit) +
                      " exceeds the widest layer input " + std::to_string(max_in));
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, scale);
  NetParams params = NetParams::zeros(specs);
  std::vector<std::size_t> pool;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    Matrix& w = params.weights().block(l);
    const std::size_t in = specs[l].in_dim;
    const std::size_t k = std::min(nnz_per_unit, in);
    pool.resize(in);
    for (Eigen::Index row = 0; row < w.rows(); ++row) {
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      // partial Fisher-Yates: the first k entries become a uniform k-subset
      for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, in - 1);
        std::swap(pool[i], pool[pick(rng)]);
      }
      for (std::size_t i = 0; i < k; ++i) {
        double v = 0.0;
        while (v == 0.0) v = gauss(rng);
        w(row, idx(pool[i])) = v;
      }
    }
  }
  return params;
}

NetParams init_gaussian(std::span<const LayerSpec> specs, std::uint64_t seed, double scale) {
  validate_layer_chain(specs);
  if (!(scale >= 0.0)) throw ConfigError("init scale must be nonnegative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  NetParams params = NetParams::zeros(specs);
  for (std::size_t l = 0; l < specs.size(); ++l) {
    Matrix& w = params.weights().block(l);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j + 1 < w.cols(); ++j) w(i, j) = scale * gauss(rng);
    }
  }
  return params;
}

double regularized_squared_norm(const NetParams& params, const LossConfig& cfg) {
  double s = 0.0;
  for (const Matrix& w : params.weights().blocks()) {
    s += cfg.regularize_bias ? w.squaredNorm() : w.leftCols(w.cols() - 1).squaredNorm();
  }
  return s;
}

BlockVector regularization_mask(const NetParams& params, const LossConfig& cfg) {
  BlockVector mask = BlockVector::zeros_like(params.weights());
  for (std::size_t l = 0; l < mask.num_blocks(); ++l) {
    Matrix& m = mask.block(l);
    m.setOnes();
    if (!cfg.regularize_bias) m.col(m.cols() - 1).setZero();
  }
  return mask;
}

ForwardTrace forward(const NetParams& params, const Batch& batch, const LossConfig& cfg) {
  if (cfg.reg_coeff < 0.0) throw ConfigError("reg_coeff must be nonnegative");
  check_batch(params, batch);
  const std::size_t num_layers = params.num_layers();
  ForwardTrace trace;
  trace.pre.reserve(num_layers);
  trace.post.reserve(num_layers - 1);
  for (std::size_t l = 0; l < num_layers; ++l) {
    if (l == 0) {
      trace.pre.push_back(affine(params.layer(0), batch.inputs.transpose()));
    } else {
      trace.pre.push_back(affine(params.layer(l), trace.post[l - 1]));
    }
    check_finite(trace.pre.back(), l);
    if (l + 1 < num_layers) trace.post.push_back(trace.pre.back().array().tanh().matrix());
  }
  trace.sample_loss = cross_entropy(trace.pre.back(), batch.targets, &trace.softmax);
  trace.data_loss = mean_in_order(trace.sample_loss);
  trace.reg_loss = cfg.reg_coeff * regularized_squared_norm(params, cfg);
  trace.loss = trace.data_loss + trace.reg_loss;
  return trace;
}

double loss_only(const NetParams& params, const Batch& batch, const LossConfig& cfg) {
  if (cfg.reg_coeff < 0.0) throw ConfigError("reg_coeff must be nonnegative");
  check_batch(params, batch);
  const std::size_t num_layers = params.num_layers();
  Matrix a = affine(params.layer(0), batch.inputs.transpose());
  check_finite(a, 0);
  for (std::size_t l = 1; l < num_layers; ++l) {
    const Matrix z = a.array().tanh().matrix();
    a = affine(params.layer(l), z);
    check_finite(a, l);
  }
  const double data_loss = mean_in_order(cross_entropy(a, batch.targets, nullptr));
  return data_loss + cfg.reg_coeff * regularized_squared_norm(params, cfg);
}

BackwardTrace backpropagate(const NetParams& params, const ForwardTrace& trace,
                            const Batch& batch) {
  const std::size_t num_layers = params.num_layers();
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (trace.pre.size() != num_layers || trace.post.size() + 1 != num_layers ||
      trace.softmax.cols() != n || trace.pre.front().cols() != n ||
      static_cast<std::size_t>(batch.inputs.rows()) != batch.size()) {
    throw ContractError("forward trace does not match this batch/network");
  }
  BackwardTrace bt;
  bt.delta_pre.resize(num_layers);
  bt.delta_post.resize(num_layers - 1);

  Matrix delta = trace.softmax;
  for (Eigen::Index j = 0; j < n; ++j) delta(batch.targets[static_cast<std::size_t>(j)], j) -= 1.0;
  delta /= static_cast<double>(n);
  bt.delta_pre[num_layers - 1] = delta;
  for (std::size_t l = num_layers - 1; l > 0; --l) {
    const Matrix& w = params.layer(l);
    bt.delta_post[l - 1] = w.leftCols(w.cols() - 1).transpose() * bt.delta_pre[l];
    const auto& z = trace.post[l - 1].array();
    bt.delta_pre[l - 1] = ((1.0 - z.square()) * bt.delta_post[l - 1].array()).matrix();
  }
  return bt;
}

BlockVector backward(const NetParams& params, const ForwardTrace& trace, const Batch& batch,
                     const LossConfig& cfg) {
  const BackwardTrace bt = backpropagate(params, trace, batch);
  BlockVector grad = BlockVector::zeros_like(params.weights());
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    Matrix& g = grad.block(l);
    const Eigen::Index in = g.cols() - 1;
    if (l == 0) {
      g.leftCols(in) = bt.delta_pre[0] * batch.inputs;
    } else {
      g.leftCols(in) = bt.delta_pre[l] * trace.post[l - 1].transpose();
    }
    g.col(in) = bt.delta_pre[l].rowwise().sum();
    const Matrix& w = params.layer(l);
    if (cfg.regularize_bias) {
      g += 2.0 * cfg.reg_coeff * w;
    } else {
      g.leftCols(in) += 2.0 * cfg.reg_coeff * w.leftCols(in);
    }
  }
  return grad;
}

LossAndGradient loss_and_gradient(const NetParams& params, const Batch& batch,
                                  const LossConfig& cfg) {
  const ForwardTrace trace = forward(params, batch, cfg);
  return {trace.loss, backward(params, trace, batch, cfg)};
}

double accuracy(const NetParams& params, const Batch& batch) {
  const ForwardTrace trace = forward(params, batch, LossConfig{0.0, false});
  std::size_t hits = 0;
  for (Eigen::Index j = 0; j < trace.softmax.cols(); ++j) {
    Eigen::Index best = 0;
    trace.softmax.col(j).maxCoeff(&best);
    if (best == batch.targets[static_cast<std::size_t>(j)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(batch.size());
}

}  // namespace tsr
