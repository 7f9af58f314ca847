#include <benchmark/benchmark.h>

#include <random>

#include "ridg/law.hpp"
#include "ridg/predictor.hpp"

namespace {

// One region's worth of smooth random space-time coefficients.
ridg::RegionSystem make_system(const ridg::PredictorContext& ctx, int dim,
                               unsigned seed) {
  const int tt = ctx.theta_t();
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  ridg::RegionSystem sys;
  sys.Q = Eigen::VectorXd::Zero(ctx.slots() * ctx.theta());
  sys.dt = 0.05;
  sys.h = {0.125, 0.125, 0.125};
  sys.W.resize(ctx.slots() * tt);
  const ridg::BasisSet st(dim + 1, ctx.mdeg());
  for (int r = 0; r < ctx.slots(); ++r)
    for (int k = 0; k < tt; ++k) {
      const std::array<int, 4> m = st.multi_index(k);
      int total = 0;
      for (int a = 0; a <= dim; ++a) total += m[a];
      sys.W[r * tt + k] = (k == 0 ? 1.0 : 0.0) + uni(rng) * std::exp(-0.7 * total);
    }
  compute_face_speeds(sys, ctx);
  return sys;
}

void run_backend(benchmark::State& state, ridg::JacobianBackend backend) {
  const int dim = 3;
  const int mdeg = static_cast<int>(state.range(0)) - 1;
  const ridg::ConservationLaw law = ridg::law_by_name("adv3d");
  ridg::PredictorContext ctx(law, mdeg);
  ridg::RegionSystem sys = make_system(ctx, dim, 42);
  ridg::RegionMatrix jac(dim, ctx.slots(), ctx.theta_t());
  for (auto _ : state) {
    ridg::region_jacobian(sys, ctx, backend, jac);
    benchmark::DoNotOptimize(jac.block(0, 0)->data());
  }
  state.SetComplexityN(state.range(0));
}

void BM_JacobianQqf(benchmark::State& state) {
  run_backend(state, ridg::JacobianBackend::Qqf);
}

void BM_JacobianQuadrature(benchmark::State& state) {
  run_backend(state, ridg::JacobianBackend::Quadrature);
}

void BM_RegionResidual(benchmark::State& state) {
  const int dim = 3;
  const int mdeg = static_cast<int>(state.range(0)) - 1;
  const ridg::ConservationLaw law = ridg::law_by_name("adv3d");
  ridg::PredictorContext ctx(law, mdeg);
  ridg::RegionSystem sys = make_system(ctx, dim, 42);
  Eigen::VectorXd residual;
  for (auto _ : state) {
    ridg::region_residual(sys, ctx, residual);
    benchmark::DoNotOptimize(residual.data());
  }
  state.SetComplexityN(state.range(0));
}

}  // namespace

BENCHMARK(BM_JacobianQqf)->DenseRange(2, 5)->Complexity()->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_JacobianQuadrature)->DenseRange(2, 5)->Complexity()->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RegionResidual)->DenseRange(2, 5)->Complexity()->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
