#include <benchmark/benchmark.h>

#include "fpk/identities.hpp"
#include "fpk/vorobiev.hpp"

using namespace fpk;

namespace {

Exec mode(const benchmark::State& s) { return s.range(1) ? Exec::Parallel : Exec::Serial; }

// [P,P] residual of a five-dimensional structure with trigonometric coefficients.
void BM_BracketResidual(benchmark::State& state) {
    const auto c = make_chart({"x1", "x2", "y", "z1", "z2"}, -1.0, 1.0);
    MultivectorField p = MultivectorField::basis(c, {0, 3}, parse_expr("sin(2*pi*y) + x2*z2", c->names));
    p.add({1, 4}, parse_expr("cos(x1*y) + 1", c->names));
    p.add({2, 4}, parse_expr("x1*z1^2", c->names));
    const auto pp = schouten_bracket(p, p);
    const auto pts = halton_points(*c, {static_cast<std::size_t>(state.range(0)), 0});
    for (auto _ : state) benchmark::DoNotOptimize(max_abs(pp, pts, mode(state)).value);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_IdentitySuite(benchmark::State& state) {
    const auto c = make_chart({"a", "b", "c", "d"}, -1.0, 1.0);
    MultivectorField p = MultivectorField::basis(c, {0, 1}, parse_expr("1 + c^2", c->names));
    p.add({2, 3}, parse_expr("a*b + sin(d)", c->names));
    p.add({0, 2}, parse_expr("0.3*b", c->names));
    const auto pts = halton_points(*c, {static_cast<std::size_t>(state.range(0)), 0});
    for (auto _ : state) benchmark::DoNotOptimize(gd_identity_suite(p, pts, 1e-10, {}, mode(state)));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

// RK4 flow with the variational equation, one trajectory per sample point.
void BM_EquivalenceFlow(benchmark::State& state) {
    AlgebroidData d = AlgebroidData::zero(make_chart({"x1", "x2"}, -1.0, 1.0), 3);
    for (int k = 0; k < 3; ++k) {
        d.alpha[k][(k + 1) % 3][(k + 2) % 3] = Expr(1.0);
        d.alpha[k][(k + 2) % 3][(k + 1) % 3] = Expr(-1.0);
    }
    d.omega.add({0, 1}, Expr(1.0));
    const Expr x1 = Expr::var(0), x2 = Expr::var(1);
    SplittingShift s{{{Expr(0.3) * x2, Expr(0.3)}, {Expr(0.0), Expr(0.3) * x1 * x1}, {Expr(0.3) * x1 * x2, Expr(0.0)}}};
    const SampleProtocol proto{static_cast<std::size_t>(state.range(0)), 0};
    for (auto _ : state)
        benchmark::DoNotOptimize(equivalence_flow(d, s, VorobievSign::Plus, 50, proto, 0.5, 0.5, mode(state)).residual);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

// second argument: 0 serial reference, 1 OpenMP
BENCHMARK(BM_BracketResidual)->ArgsProduct({{64, 1024, 8192}, {0, 1}})->ArgNames({"points", "omp"});
BENCHMARK(BM_IdentitySuite)->ArgsProduct({{64, 512}, {0, 1}})->ArgNames({"points", "omp"});
BENCHMARK(BM_EquivalenceFlow)->ArgsProduct({{16, 64}, {0, 1}})->ArgNames({"points", "omp"})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
