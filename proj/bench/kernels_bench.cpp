// Serial reference kernels against the block-factored OpenMP kernels, on
// the stationary distribution of the uniform policy (desk = 0, moderate = 1).

#include <benchmark/benchmark.h>

#include <memory>

#include "karma_ev/equilibrium.hpp"
#include "karma_ev/kernels.hpp"

using namespace karma_ev;

namespace {

struct Fixture {
    StateSpace space;
    TransitionTables tables;
    kernels::BlockGraph graph;
    SocialState social;
    IntervalSnapshot snap;
    std::vector<double> v_next;

    explicit Fixture(ModelParams params)
        : space(std::move(params)), tables(space), graph(space, tables)
    {
        social.pi = uniform_policy(space);
        social.d = stationary_distribution(space, social.pi).d;
        const int t = 2;
        const std::size_t n = space.individual_count();
        const std::size_t n_act = space.actions_per_interval();
        snap = make_snapshot(space, t, std::span(social.d).subspan(t * n, n),
                             std::span(social.pi).subspan(t * n_act, n_act), AuctionRule::smoothed);
        v_next.resize(n);
        for (std::size_t i = 0; i < n; ++i) v_next[i] = -static_cast<double>(i % 17);
    }

    std::span<const double> d_t() const
    {
        const std::size_t n = space.individual_count();
        return std::span(social.d).subspan(2 * n, n);
    }
    std::span<const double> pi_t() const
    {
        const std::size_t n_act = space.actions_per_interval();
        return std::span(social.pi).subspan(2 * n_act, n_act);
    }
};

Fixture& fixture(int which)
{
    static std::unique_ptr<Fixture> desk, moderate;
    auto& f = which == 0 ? desk : moderate;
    if (!f) f = std::make_unique<Fixture>(which == 0 ? desk_scale() : moderate_scarcity());
    return *f;
}

void BM_PropagateSerial(benchmark::State& state)
{
    Fixture& f = fixture(static_cast<int>(state.range(0)));
    std::vector<double> out(f.space.individual_count());
    for (auto _ : state) {
        kernels::propagate_serial(f.space, f.tables, f.snap, f.d_t(), f.pi_t(), out);
        benchmark::DoNotOptimize(out.data());
    }
}

void BM_PropagateParallel(benchmark::State& state)
{
    Fixture& f = fixture(static_cast<int>(state.range(0)));
    std::vector<double> out(f.space.individual_count());
    kernels::Workspace work;
    for (auto _ : state) {
        kernels::propagate_parallel(f.space, f.graph, f.snap, f.d_t(), f.pi_t(), out, work);
        benchmark::DoNotOptimize(out.data());
    }
}

void BM_BackupSerial(benchmark::State& state)
{
    Fixture& f = fixture(static_cast<int>(state.range(0)));
    std::vector<double> v(f.space.individual_count()), q(f.space.actions_per_interval());
    for (auto _ : state) {
        kernels::backup_serial(f.space, f.tables, f.snap, 1.0, f.v_next, f.pi_t(), v, q);
        benchmark::DoNotOptimize(q.data());
    }
}

void BM_BackupParallel(benchmark::State& state)
{
    Fixture& f = fixture(static_cast<int>(state.range(0)));
    std::vector<double> v(f.space.individual_count()), q(f.space.actions_per_interval());
    kernels::Workspace work;
    for (auto _ : state) {
        kernels::backup_parallel(f.space, f.graph, f.snap, 1.0, f.v_next, f.pi_t(), v, q, work);
        benchmark::DoNotOptimize(q.data());
    }
}

}  // namespace

// Argument 0 is the desk-scale instance, 1 the moderate-scarcity one.
BENCHMARK(BM_PropagateSerial)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PropagateParallel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackupSerial)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackupParallel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
