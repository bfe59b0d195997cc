#include <benchmark/benchmark.h>

#include "kherd/bench.hpp"
#include "kherd/gradapprox.hpp"
#include "kherd/herding.hpp"
#include "kherd/simplexopt.hpp"

using namespace kherd;

namespace {

std::vector<Point> box_points(std::size_t n, std::uint64_t seed) {
  return sample_measure(make_symmetric_box(2), MeasureKind::trunc_gaussian, n, seed);
}

void BM_KernelEval(benchmark::State& state) {
  const KernelKind kind = static_cast<KernelKind>(state.range(0));
  const Domain dom = kind == KernelKind::sphere_distance ? make_unit_sphere()
                                                         : make_symmetric_box(2);
  const Kernel k(kind, dom);
  const auto pts = sample_measure(dom, MeasureKind::uniform, 256, 7);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(k.eval_unchecked(pts[i & 255], pts[(i * 7 + 3) & 255]));
    ++i;
  }
}
BENCHMARK(BM_KernelEval)->Arg(0)->Arg(1)->Arg(2);

void BM_EmpiricalEmbeddingEval(benchmark::State& state) {
  const Kernel k(KernelKind::matern32, make_symmetric_box(2));
  const auto emb = empirical_embedding(k, MeasureKind::uniform, state.range(0), 11);
  const auto pts = box_points(64, 3);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize((*emb)(pts[i & 63]));
    ++i;
  }
}
BENCHMARK(BM_EmpiricalEmbeddingEval)->Arg(1000)->Arg(10000);

void BM_MmdSquared(benchmark::State& state) {
  const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
  const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
  const auto pts = box_points(state.range(0), 5);
  DiscreteMeasure m;
  for (const auto& p : pts) m.add_atom(p, 1.0 / static_cast<double>(pts.size()));
  const GramCache cache = GramCache::from_measure(k, *emb, m);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mmd_squared(m, *emb, cache));
  }
}
BENCHMARK(BM_MmdSquared)->Arg(64)->Arg(256);

void BM_SimplexQp(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
  const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
  const auto pts = box_points(n, 9);
  QuadraticProblem prob;
  prob.G.resize(n, n);
  prob.b.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    prob.b[i] = (*emb)(pts[i]);
    for (std::size_t j = 0; j < n; ++j) prob.G(i, j) = k(pts[i], pts[j]);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(simplex_qp(prob));
  }
}
BENCHMARK(BM_SimplexQp)->Arg(16)->Arg(64)->Arg(128);

void BM_Nnls(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
  const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
  const auto pts = box_points(n, 13);
  QuadraticProblem prob;
  prob.G.resize(n, n);
  prob.b.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    prob.b[i] = (*emb)(pts[i]);
    for (std::size_t j = 0; j < n; ++j) prob.G(i, j) = k(pts[i], pts[j]);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(nnls(prob));
  }
}
BENCHMARK(BM_Nnls)->Arg(16)->Arg(64);

void BM_GcosDirection(benchmark::State& state) {
  const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
  const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
  const auto candidates = box_points(state.range(0), 21);
  DiscreteMeasure nu;
  nu.add_atom(candidates[0], 0.5);
  nu.add_atom(candidates[1], 0.5);
  for (auto _ : state) {
    IterateState st(k, *emb, candidates, nu);
    benchmark::DoNotOptimize(gcos(st, 8, 1e-4));
  }
}
BENCHMARK(BM_GcosDirection)->Arg(500)->Arg(2000);

void BM_HerdingRun(benchmark::State& state) {
  const Kernel k(KernelKind::gaussian, make_symmetric_box(2));
  const auto emb = analytic_embedding(k, MeasureKind::trunc_gaussian);
  const auto candidates = box_points(1000, 33);
  HerdingConfig cfg;
  cfg.variant = Variant::accelerated;
  cfg.approximator = Approximator::gcos;
  cfg.inner_rounds = 8;
  cfg.delta = 1e-4;
  cfg.max_iterations = state.range(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(herd(cfg, k, *emb, candidates));
  }
}
BENCHMARK(BM_HerdingRun)->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
