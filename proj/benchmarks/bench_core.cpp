// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#include <benchmark/benchmark.h>

#include "treeshrink/sampler.hpp"
#include "treeshrink/variational.hpp"

namespace treeshrink {
namespace {

LayoutPtr wavelet(std::size_t side) {
  return std::make_shared<const TreeLayout>(TreeLayout::wavelet(side, side, default_levels(side, side)));
}

void BM_Dwt2Roundtrip(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Transform t(wavelet(side));
  RngHandle rng(1);
  std::vector<double> img(side * side), coef(img.size()), back(img.size());
  for (double& v : img) v = rng.uniform();
  for (auto _ : state) {
    t.analyze(img, coef);
    t.synthesize(coef, back);
    benchmark::DoNotOptimize(back.data());
  }
}
BENCHMARK(BM_Dwt2Roundtrip)->Arg(64)->Arg(128)->Arg(256);

void BM_BdctRoundtrip(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Transform t(std::make_shared<const TreeLayout>(TreeLayout::block_dct(side, side)));
  RngHandle rng(2);
  std::vector<double> img(side * side), coef(img.size()), back(img.size());
  for (double& v : img) v = rng.uniform();
  for (auto _ : state) {
    t.analyze(img, coef);
    t.synthesize(coef, back);
    benchmark::DoNotOptimize(back.data());
  }
}
BENCHMARK(BM_BdctRoundtrip)->Arg(64)->Arg(128);

void BM_LogBesselK(benchmark::State& state) {
  const double p = static_cast<double>(state.range(0)) / 4.0;
  double x = 1e-3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(log_bessel_k(p, x));
    x = x < 50.0 ? x * 1.7 : 1e-3;
  }
}
BENCHMARK(BM_LogBesselK)->Arg(-2)->Arg(2)->Arg(40);

void BM_SampleGig(benchmark::State& state) {
  RngHandle rng(3);
  const GigParams g{2.0, 0.3, -0.98};
  for (auto _ : state) benchmark::DoNotOptimize(sample_gig(g, rng));
}
BENCHMARK(BM_SampleGig);

struct CsFixture {
  explicit CsFixture(std::size_t side) : layout(wavelet(side)), rng(4) {
    const std::size_t n = side * side;
    op = std::make_unique<SensingOperator>(make_gaussian_operator(measurement_count(0.4, n), n, Transform(layout), rng));
    TreeSignalConfig sig;
    sig.p_root_active = 0.3;
    sig.p_child_active = 0.4;
    const TreePyramid x = draw_tree_sparse_signal(layout, sig, rng);
    y = add_gaussian_noise(op->apply_psi(x.coefficients()), 0.05, rng);
  }
  LayoutPtr layout;
  RngHandle rng;
  std::unique_ptr<SensingOperator> op;
  std::vector<double> y;
};

void BM_GibbsSweepCs(benchmark::State& state) {
  CsFixture f(static_cast<std::size_t>(state.range(0)));
  GibbsSampler sampler(f.y, *f.op, initial_state(f.y, *f.op, PriorStructure::Tree, Hyperparameters{}, false));
  for (auto _ : state) benchmark::DoNotOptimize(sampler.sweep(f.rng));
}
BENCHMARK(BM_GibbsSweepCs)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_VariationalIterateCs(benchmark::State& state) {
  CsFixture f(static_cast<std::size_t>(state.range(0)));
  SolverConfig cfg;
  VariationalSolver solver(f.y, *f.op, initial_variational_state(f.y, *f.op, cfg.structure, cfg.hyper, false), cfg);
  for (auto _ : state) benchmark::DoNotOptimize(solver.iterate(f.rng));
}
BENCHMARK(BM_VariationalIterateCs)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_GammaMetropolis(benchmark::State& state) {
  const auto layout = wavelet(static_cast<std::size_t>(state.range(0)));
  RngHandle rng(5);
  ModelState st;
  st.x = TreePyramid(layout);
  st.shrinkage = prior_draw_tree(layout, st.hyper, rng);
  for (auto _ : state) benchmark::DoNotOptimize(update_gamma_metropolis(st, rng));
}
BENCHMARK(BM_GammaMetropolis)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace treeshrink

BENCHMARK_MAIN();
