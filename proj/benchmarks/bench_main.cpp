#include <benchmark/benchmark.h>

#include <random>

#include "tsr/tsr.hpp"

namespace {

using namespace tsr;

std::vector<LayerSpec> specs_for(std::initializer_list<std::size_t> widths) {
  std::vector<std::size_t> w(widths);
  std::vector<LayerSpec> s;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) s.push_back({w[i], w[i + 1]});
  return s;
}

Batch gaussian_batch(std::size_t n, std::size_t dim, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Batch b;
  b.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < b.inputs.size(); ++i) b.inputs.data()[i] = g(rng);
  for (std::size_t i = 0; i < n; ++i) b.targets.push_back(static_cast<int>(i % classes));
  return b;
}

const std::vector<LayerSpec>& mnist_net() {
  static const auto s = specs_for({784, 50, 10});
  return s;
}

const std::vector<LayerSpec>& deep_net() {
  static const auto s = specs_for({784, 80, 70, 60, 50, 40, 30, 20, 10});
  return s;
}

void BM_LossAndGradient(benchmark::State& state) {
  const auto& specs = state.range(0) == 0 ? mnist_net() : deep_net();
  const NetParams p = init_sparse(specs, 1, 15, 1.0);
  const Batch b = gaussian_batch(500, 784, 10, 2);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(p, b, LossConfig{}).loss);
}
BENCHMARK(BM_LossAndGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_HvpBlock(benchmark::State& state) {
  const auto& specs = deep_net();
  const NetParams p = init_sparse(specs, 1, 15, 1.0);
  const Batch b = gaussian_batch(64, 784, 10, 3);
  const CurvatureContext ctx(p, b, LossConfig{});
  const auto layer = static_cast<std::size_t>(state.range(0));
  const BlockDirection dir{layer, Matrix::Ones(p.layer(layer).rows(), p.layer(layer).cols())};
  for (auto _ : state) benchmark::DoNotOptimize(hvp_block(ctx, dir).norm());
}
BENCHMARK(BM_HvpBlock)->Arg(0)->Arg(4)->Arg(7)->Unit(benchmark::kMicrosecond);

void BM_AssembleModel(benchmark::State& state) {
  const auto& specs = state.range(0) == 0 ? mnist_net() : deep_net();
  const NetParams p = init_sparse(specs, 1, 15, 1.0);
  const Batch b = gaussian_batch(500, 784, 10, 4);
  const std::vector<Batch> subs = split_subminibatches(b, specs.size());
  const LossConfig cfg{};
  const BlockVector g = loss_and_gradient(p, b, cfg).gradient;
  BlockVector step = g;
  step *= -0.01;
  step.block(0)(0, 0) += 1e-3;
  const SubspaceBasis basis = build_basis(g, step);
  for (auto _ : state) benchmark::DoNotOptimize(assemble_model(p, basis, g, subs, cfg).b().norm());
}
BENCHMARK(BM_AssembleModel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_EighSmall(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) a(i, j) = a(j, i) = g(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(eigh_small(a).values.sum());
}
BENCHMARK(BM_EighSmall)->Arg(4)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_SolveFull(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  Matrix a(n, n);
  Vector r(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r[i] = g(rng);
    for (Eigen::Index j = 0; j <= i; ++j) a(i, j) = a(j, i) = g(rng);
  }
  const EigenDecomp eig = decompose(QuadModel(a, r));
  for (auto _ : state) benchmark::DoNotOptimize(solve_full(eig, 0.1).q_value);
}
BENCHMARK(BM_SolveFull)->Arg(4)->Arg(16)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
