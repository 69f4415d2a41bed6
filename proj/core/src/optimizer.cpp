#include "tsr/optimizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include "tsr/errors.hpp"
#include "tsr/hvp.hpp"

namespace tsr {

namespace {

constexpr int kMaxRefineSteps = 100;
constexpr double kHalve = 0.5;
constexpr double kRefine = 0.7;
constexpr double kGrow = 1.3;

struct StrategyName {
  StrategyKind kind;
  std::string_view canonical;
  std::string_view short_name;
};

constexpr std::array<StrategyName, 6> kStrategyNames{{
    {StrategyKind::TwoStage, "TwoStage", "two-stage"},
    {StrategyKind::TrustRegionClassic, "TrustRegionClassic", "trust-region"},
    {StrategyKind::OnlyPositive, "OnlyPositive", "only-positive"},
    {StrategyKind::SaddleFree, "SaddleFree", "saddle-free"},
    {StrategyKind::PositiveNegative, "PositiveNegative", "positive-negative"},
    {StrategyKind::NegativePositive, "NegativePositive", "negative-positive"},
}};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Loss at a trial point; overflow inside the network counts as "no decrease".
double probe(const Evaluator& evaluator, const BlockVector& w) {
  try {
    const double f = evaluator(w);
    return std::isnan(f) ? std::numeric_limits<double>::infinity() : f;
  } catch (const NumericError&) {
    return std::numeric_limits<double>::infinity();
  }
}

double gradient_descent_term(const SubspaceBasis& basis, const BlockVector& grad,
                             const Vector& alpha) {
  return project(basis, grad).dot(alpha);
}

struct Prepared {
  double loss = 0.0;
  BlockVector grad;
  std::optional<SubspaceBasis> basis;
  std::optional<EigenDecomp> eig;
};

Prepared prepare(const TwoStageState& state, const Batch& minibatch,
                 std::span<const Batch> subbatches, const LossConfig& cfg, StepReport& report) {
  Prepared p;
  LossAndGradient lg = loss_and_gradient(state.params, minibatch, cfg);
  p.loss = lg.loss;
  p.grad = std::move(lg.gradient);
  report.loss_before = p.loss;
  report.loss_after_stage1 = p.loss;
  report.loss_after_stage2 = p.loss;
  if (p.grad.norm() == 0.0) return p;
  try {
    p.basis = build_basis(p.grad, state.params.weights() - state.prev_params.weights());
  } catch (const DegenerateError&) {
    return p;
  }
  const QuadModel model = assemble_model(state.params, *p.basis, p.grad, subbatches, cfg);
  p.eig = decompose(model);
  report.model_built = true;
  report.basis_dim = p.basis->dim();
  report.orthonormality_error = orthonormality_error(*p.basis);
  report.eig_min = p.eig->values.minCoeff();
  report.eig_max = p.eig->values.maxCoeff();
  return p;
}

void record_stage1(StepReport& report, const StageResult& s, const SubspaceBasis& basis,
                   const BlockVector& grad) {
  report.stage1_executed = s.executed;
  report.stage1_backtracks = s.backtracks;
  report.stage1_radius = s.executed ? s.radius : 0.0;
  if (s.executed) {
    report.stage1_descent = gradient_descent_term(basis, grad, s.alpha);
    report.loss_after_stage1 = s.loss;
    report.loss_after_stage2 = s.loss;
  }
}

void record_stage2(StepReport& report, const GradientStageResult& s) {
  report.stage2_executed = s.executed;
  report.stage2_step = s.step;
  if (s.executed) report.loss_after_stage2 = s.loss;
}

BlockVector gradient_at(const BlockVector& w, const Batch& minibatch, const LossConfig& cfg) {
  return loss_and_gradient(NetParams(w), minibatch, cfg).gradient;
}

// Linesearch over the radius of the negative-curvature subspace step.
GradientStageResult negative_stage(const BlockVector& w, const SubspaceBasis& basis,
                                   const EigenDecomp& eig, double delta1,
                                   const Evaluator& evaluator, double current_loss,
                                   int max_halvings) {
  if (eig.negative_indices().empty()) {
    GradientStageResult skipped;
    skipped.weights = w;
    skipped.delta1 = delta1;
    skipped.loss = current_loss;
    return skipped;
  }
  return stage_linesearch(
      w, [&](double radius) { return apply_basis(basis, solve_negative_subspace(eig, radius).alpha, w); },
      delta1, evaluator, current_loss, max_halvings);
}

void commit(TwoStageState& state, BlockVector new_weights) {
  state.prev_params = state.params;
  state.params = NetParams(std::move(new_weights));
  ++state.iteration;
}

}  // namespace

std::string_view to_string(StrategyKind kind) {
  for (const StrategyName& n : kStrategyNames) {
    if (n.kind == kind) return n.canonical;
  }
  return "unknown";
}

StrategyKind parse_strategy(std::string_view name) {
  const std::string key = lower(name);
  for (const StrategyName& n : kStrategyNames) {
    if (key == lower(n.canonical) || key == n.short_name) return n.kind;
  }
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

std::vector<StrategyKind> all_strategies() {
  std::vector<StrategyKind> out;
  for (const StrategyName& n : kStrategyNames) out.push_back(n.kind);
  return out;
}

SubspaceBasis build_basis(const BlockVector& grad, const BlockVector& prev_step) {
  if (!grad.same_shape(prev_step)) throw ContractError("gradient and step shapes differ");
  const std::size_t num_layers = grad.num_blocks();
  SubspaceBasis basis;
  basis.layer_column_count.assign(num_layers, 0);
  std::vector<std::vector<BasisColumn>> per_kind(2);
  for (std::size_t l = 0; l < num_layers; ++l) {
    std::vector<Matrix> kept;
    const std::array<const Matrix*, 2> candidates{&grad.block(l), &prev_step.block(l)};
    for (int kind = 0; kind < 2; ++kind) {
      const Matrix& cand = *candidates[static_cast<std::size_t>(kind)];
      const double n0 = cand.norm();
      if (!(n0 > 1e-300)) continue;
      Matrix res = cand;
      // two passes of classical Gram-Schmidt keep orthogonality near machine precision
      for (int pass = 0; pass < 2; ++pass) {
        for (const Matrix& q : kept) res -= q.cwiseProduct(res).sum() * q;
      }
      const double rn = res.norm();
      if (!(rn > 1e-10 * n0)) continue;
      kept.push_back(res / rn);
      per_kind[static_cast<std::size_t>(kind)].push_back(BasisColumn{l, kind, kept.back()});
      ++basis.layer_column_count[l];
    }
  }
  for (auto& group : per_kind) {
    for (BasisColumn& c : group) basis.columns.push_back(std::move(c));
  }
  if (basis.columns.empty()) {
    throw DegenerateError("gradient and previous step vanish in every layer");
  }
  return basis;
}

BlockVector apply_basis(const SubspaceBasis& basis, const Vector& alpha, const BlockVector& shape) {
  if (alpha.size() != basis.dim()) throw ContractError("coefficient vector size mismatch");
  BlockVector out = BlockVector::zeros_like(shape);
  for (Eigen::Index i = 0; i < basis.dim(); ++i) {
    const BasisColumn& c = basis.columns[static_cast<std::size_t>(i)];
    out.block(c.layer) += alpha[i] * c.block;
  }
  return out;
}

Vector project(const SubspaceBasis& basis, const BlockVector& v) {
  Vector out(basis.dim());
  for (Eigen::Index i = 0; i < basis.dim(); ++i) {
    const BasisColumn& c = basis.columns[static_cast<std::size_t>(i)];
    out[i] = c.block.cwiseProduct(v.block(c.layer)).sum();
  }
  return out;
}

double orthonormality_error(const SubspaceBasis& basis) {
  double worst = 0.0;
  for (std::size_t i = 0; i < basis.columns.size(); ++i) {
    for (std::size_t j = i; j < basis.columns.size(); ++j) {
      const BasisColumn& a = basis.columns[i];
      const BasisColumn& b = basis.columns[j];
      const double dot = a.layer == b.layer ? a.block.cwiseProduct(b.block).sum() : 0.0;
      worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

QuadModel assemble_model(const NetParams& params, const SubspaceBasis& basis,
                         const BlockVector& grad, std::span<const Batch> subbatches,
                         const LossConfig& cfg) {
  const std::size_t num_layers = params.num_layers();
  if (subbatches.size() != num_layers) {
    throw ContractError("expected " + std::to_string(num_layers) + " sub-minibatches, got " +
                        std::to_string(subbatches.size()));
  }
  if (!grad.same_shape(params.weights())) throw ContractError("gradient shape mismatch");
  const Eigen::Index k = basis.dim();
  std::vector<std::optional<CurvatureContext>> contexts(num_layers);
  std::vector<BlockVector> products;
  products.reserve(static_cast<std::size_t>(k));
  for (const BasisColumn& c : basis.columns) {
    if (c.layer >= num_layers) throw ContractError("basis column outside the network");
    if (subbatches[c.layer].size() == 0) throw ContractError("empty sub-minibatch");
    if (!contexts[c.layer]) contexts[c.layer].emplace(params, subbatches[c.layer], cfg);
    products.push_back(hvp_block(*contexts[c.layer], BlockDirection{c.layer, c.block}));
  }
  Matrix b(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const BasisColumn& ci = basis.columns[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < k; ++j) {
      b(i, j) = ci.block.cwiseProduct(products[static_cast<std::size_t>(j)].block(ci.layer)).sum();
    }
  }
  return QuadModel(std::move(b), project(basis, grad));
}

Evaluator minibatch_evaluator(const Batch& batch, const LossConfig& cfg) {
  return [&batch, cfg](const BlockVector& w) { return loss_only(NetParams(w), batch, cfg); };
}

StageResult stage_trust_region(const BlockVector& weights, const SubspaceBasis& basis,
                               const std::function<TRSolution(double)>& solve,
                               double initial_radius, const Evaluator& evaluator,
                               double current_loss, int max_halvings) {
  StageResult result;
  result.weights = weights;
  result.loss = current_loss;
  if (!(initial_radius > 0.0) || !std::isfinite(initial_radius)) return result;

  struct Trial {
    double loss;
    Vector alpha;
  };
  auto trial = [&](double radius) {
    TRSolution sol = solve(radius);
    const double f = probe(evaluator, weights - apply_basis(basis, sol.alpha, weights));
    return Trial{f, std::move(sol.alpha)};
  };

  double radius = initial_radius;
  Trial best = trial(radius);
  while (!(best.loss < current_loss)) {
    if (result.backtracks >= max_halvings) return result;
    radius *= kHalve;
    ++result.backtracks;
    best = trial(radius);
  }
  for (int k = 0; k < kMaxRefineSteps; ++k) {
    Trial next = trial(kRefine * radius);
    if (!(next.loss < best.loss)) break;
    radius *= kRefine;
    best = std::move(next);
  }
  result.weights = weights - apply_basis(basis, best.alpha, weights);
  result.executed = true;
  result.radius = radius;
  result.loss = best.loss;
  result.alpha = std::move(best.alpha);
  return result;
}

StageResult stage_positive(const BlockVector& weights, const SubspaceBasis& basis,
                           const EigenDecomp& eig, const Evaluator& evaluator,
                           double current_loss, int max_halvings) {
  if (eig.positive_indices().empty()) {
    StageResult skipped;
    skipped.weights = weights;
    skipped.loss = current_loss;
    return skipped;
  }
  return stage_trust_region(
      weights, basis, [&eig](double radius) { return solve_positive_subspace(eig, radius); },
      positive_newton_norm(eig), evaluator, current_loss, max_halvings);
}

GradientStageResult stage_linesearch(const BlockVector& weights,
                                     const std::function<BlockVector(double)>& step,
                                     double delta1, const Evaluator& evaluator,
                                     double current_loss, int max_halvings) {
  if (!(delta1 > 0.0)) throw ContractError("step length must be positive");
  GradientStageResult result;
  result.weights = weights;
  result.delta1 = delta1;
  result.loss = current_loss;
  auto trial = [&](double length) { return probe(evaluator, weights - step(length)); };

  double length = delta1;
  double best = trial(length);
  if (best < current_loss) {
    for (int k = 0; k < kMaxRefineSteps; ++k) {
      const double next = trial(kGrow * length);
      if (!(next < best)) break;
      length *= kGrow;
      best = next;
    }
  } else {
    while (!(best < current_loss)) {
      if (result.halvings >= max_halvings) {
        result.delta1 = kHalve * delta1;
        return result;
      }
      length *= kHalve;
      ++result.halvings;
      best = trial(length);
    }
    for (int k = 0; k < kMaxRefineSteps; ++k) {
      const double next = trial(kRefine * length);
      if (!(next < best)) break;
      length *= kRefine;
      best = next;
    }
  }
  result.weights = weights - step(length);
  result.executed = true;
  result.delta1 = length;
  result.step = length;
  result.loss = best;
  return result;
}

GradientStageResult stage_gradient(const BlockVector& weights, const BlockVector& grad,
                                   double delta1, const Evaluator& evaluator,
                                   double current_loss, int max_halvings) {
  const double gnorm = grad.norm();
  if (!(gnorm > 0.0)) {
    GradientStageResult skipped;
    skipped.weights = weights;
    skipped.delta1 = delta1;
    skipped.loss = current_loss;
    return skipped;
  }
  return stage_linesearch(
      weights, [&](double length) { return (length / gnorm) * grad; }, delta1, evaluator,
      current_loss, max_halvings);
}

TwoStageState bootstrap(const NetParams& params0, const Batch& minibatch, double eps0,
                        const LossConfig& cfg, std::uint64_t seed) {
  if (!(eps0 > 0.0)) throw ConfigError("eps0 must be positive");
  const LossAndGradient lg = loss_and_gradient(params0, minibatch, cfg);
  const double gnorm = lg.gradient.norm();
  if (!(gnorm > 0.0)) throw DegenerateError("initial gradient is zero");
  TwoStageState state;
  state.prev_params = params0;
  BlockVector w = params0.weights();
  w.axpy(-eps0, lg.gradient);
  state.params = NetParams(std::move(w));
  state.delta1 = eps0 * gnorm;
  state.iteration = 1;
  state.rng.seed(seed);
  return state;
}

StepReport two_stage_iterate(TwoStageState& state, const Batch& minibatch,
                             std::span<const Batch> subbatches, const LossConfig& cfg,
                             const OptimizerOptions& options) {
  return variant_iterate(StrategyKind::TwoStage, state, minibatch, subbatches, cfg, options);
}

StepReport variant_iterate(StrategyKind strategy, TwoStageState& state, const Batch& minibatch,
                           std::span<const Batch> subbatches, const LossConfig& cfg,
                           const OptimizerOptions& options) {
  StepReport report;
  report.strategy = strategy;
  Prepared p = prepare(state, minibatch, subbatches, cfg, report);
  const Evaluator evaluator = minibatch_evaluator(minibatch, cfg);
  const int max_h = options.max_halvings;
  BlockVector w = state.params.weights();
  double f = p.loss;
  const bool have_model = p.eig.has_value();

  switch (strategy) {
    case StrategyKind::TwoStage: {
      BlockVector grad = p.grad;
      if (have_model) {
        const StageResult s1 = stage_positive(w, *p.basis, *p.eig, evaluator, f, max_h);
        record_stage1(report, s1, *p.basis, p.grad);
        if (s1.executed) {
          w = s1.weights;
          f = s1.loss;
          grad = gradient_at(w, minibatch, cfg);
        }
      }
      const GradientStageResult s2 = stage_gradient(w, grad, state.delta1, evaluator, f, max_h);
      record_stage2(report, s2);
      state.delta1 = s2.delta1;
      if (s2.executed) w = s2.weights;
      break;
    }
    case StrategyKind::OnlyPositive: {
      if (have_model) {
        const StageResult s1 = stage_positive(w, *p.basis, *p.eig, evaluator, f, max_h);
        record_stage1(report, s1, *p.basis, p.grad);
        if (s1.executed) w = s1.weights;
      }
      break;
    }
    case StrategyKind::TrustRegionClassic:
    case StrategyKind::SaddleFree: {
      if (have_model) {
        const EigenDecomp& eig = *p.eig;
        double radius = absolute_newton_norm(eig);
        if (!(radius > 0.0)) radius = state.delta1;
        std::function<TRSolution(double)> solve;
        if (strategy == StrategyKind::TrustRegionClassic) {
          solve = [&eig](double eps) { return solve_full(eig, eps); };
        } else {
          solve = [&eig](double eps) { return solve_saddle_free(eig, eps); };
        }
        const StageResult s1 = stage_trust_region(w, *p.basis, solve, radius, evaluator, f, max_h);
        record_stage1(report, s1, *p.basis, p.grad);
        if (s1.executed) w = s1.weights;
      }
      break;
    }
    case StrategyKind::PositiveNegative: {
      if (have_model) {
        const StageResult s1 = stage_positive(w, *p.basis, *p.eig, evaluator, f, max_h);
        record_stage1(report, s1, *p.basis, p.grad);
        EigenDecomp eig = *p.eig;
        if (s1.executed) {
          w = s1.weights;
          f = s1.loss;
          eig = p.eig->with_gradient(project(*p.basis, gradient_at(w, minibatch, cfg)));
        }
        const GradientStageResult s2 =
            negative_stage(w, *p.basis, eig, state.delta1, evaluator, f, max_h);
        record_stage2(report, s2);
        state.delta1 = s2.delta1;
        if (s2.executed) w = s2.weights;
      }
      break;
    }
    case StrategyKind::NegativePositive: {
      if (have_model) {
        const GradientStageResult s1 =
            negative_stage(w, *p.basis, *p.eig, state.delta1, evaluator, f, max_h);
        state.delta1 = s1.delta1;
        report.stage1_executed = s1.executed;
        report.stage1_backtracks = s1.halvings;
        report.stage1_radius = s1.step;
        EigenDecomp eig = *p.eig;
        if (s1.executed) {
          w = s1.weights;
          f = s1.loss;
          report.loss_after_stage1 = f;
          report.loss_after_stage2 = f;
          eig = p.eig->with_gradient(project(*p.basis, gradient_at(w, minibatch, cfg)));
        }
        const StageResult s2 = stage_positive(w, *p.basis, eig, evaluator, f, max_h);
        report.stage2_executed = s2.executed;
        report.stage2_step = s2.executed ? s2.radius : 0.0;
        if (s2.executed) {
          w = s2.weights;
          report.loss_after_stage2 = s2.loss;
        }
      }
      break;
    }
  }
  commit(state, std::move(w));
  return report;
}

}  // namespace tsr
