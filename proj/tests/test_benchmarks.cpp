#include <doctest.h>

#include <numeric>

#include "karma_ev/benchmarks.hpp"
#include "karma_ev/metrics.hpp"

using namespace karma_ev;

TEST_CASE("priority fill")
{
    const std::vector<double> two{0.25, 0.25};
    const auto a = priority_fill(two, 0.25 * 8.0, 8.0);
    CHECK(a.admit[0] == 1.0);
    CHECK(a.admit[1] == 0.0);

    const auto all = priority_fill(two, 8.0, 8.0);
    CHECK(all.admit[0] == 1.0);
    CHECK(all.admit[1] == 1.0);
    CHECK(all.marginal == -1);

    const std::vector<double> three{0.1, 0.2, 0.3};
    const auto part = priority_fill(three, 2.0, 8.0);
    CHECK(part.admit[0] == 1.0);
    CHECK(part.admit[1] == doctest::Approx(0.75));
    CHECK(part.admit[2] == 0.0);
    CHECK(part.marginal == 1);
    double used = 0.0;
    for (std::size_t j = 0; j < 3; ++j) used += part.admit[j] * three[j] * 8.0;
    CHECK(used <= 2.0 + 1e-12);
}

TEST_CASE("EDF serves the earlier deadline first")
{
    const StateSpace space(desk_scale());
    const BenchmarkChain chain(space, Scheme::edf);
    const ModelParams& p = space.params();
    const auto nk = static_cast<std::size_t>(p.n_karma());
    std::vector<double> d(chain.states_per_interval(), 0.0);
    const std::size_t near = space.individual_index({kPresent, p.deadline_index(2.0), 1, 0, 0, 0}) / nk;
    const std::size_t far = space.individual_index({kPresent, p.deadline_index(4.0), 1, 0, 0, 0}) / nk;
    d[chain.index(near, 0)] = 0.2;
    d[chain.index(far, 0)] = 0.2;
    d[chain.index(space.individual_index({kAbsent, 0, 0, 0, 0, 0}) / nk, 0)] = 0.6;
    const auto alloc = chain.allocate(1, d);   // capacity 2 kWh/user: 0.25 of the population
    CHECK(alloc.admit[static_cast<std::size_t>(chain.priority_class(chain.index(near, 0)))] == 1.0);
    CHECK(alloc.admit[static_cast<std::size_t>(chain.priority_class(chain.index(far, 0)))] == doctest::Approx(0.25));

    // Someone already at sd only gets what is left over.
    const std::size_t done = space.individual_index({kPresent, p.deadline_index(1.0), 0, 0, 1, 0}) / nk;
    CHECK(p.soc_value(1) >= p.desired_soc_levels[0]);
    CHECK(chain.priority_class(chain.index(done, 0)) > chain.priority_class(chain.index(far, 0)));
    // Full batteries and absent users cannot be charged.
    CHECK(chain.priority_class(chain.index(space.individual_index({kPresent, 1, 1, 0, 2, 0}) / nk, 0)) == -1);
    CHECK(chain.priority_class(chain.index(space.individual_index({kAbsent, 1, 1, 0, 0, 0}) / nk, 0)) == -1);
}

TEST_CASE("benchmark chains are row-stochastic")
{
    const StateSpace space(desk_scale());
    for (Scheme s : {Scheme::fcfs, Scheme::edf}) {
        const BenchmarkChain chain(space, s);
        for (int t = 0; t < space.n_intervals(); ++t)
            for (std::size_t i = 0; i < chain.states_per_interval(); ++i)
                for (double admit : {0.0, 0.37, 1.0}) {
                    // only chargeable classes see a positive admission
                    if (chain.priority_class(i) < 0 && admit > 0.0) continue;
                    double total = 0.0;
                    for (const auto& [j, w] : chain.successors(t, i, admit)) {
                        REQUIRE(j < chain.states_per_interval());
                        total += w;
                    }
                    REQUIRE(std::abs(total - 1.0) <= 1e-12);
                }
    }
    CHECK_THROWS_AS(BenchmarkChain(space, Scheme::karma), ModelError);
}

TEST_CASE("benchmark stationary distributions")
{
    const StateSpace space(desk_scale());
    for (Scheme s : {Scheme::fcfs, Scheme::edf}) {
        const BenchmarkChain chain(space, s);
        const auto res = benchmark_stationary(chain);
        REQUIRE(res.converged);
        const std::size_t n = chain.states_per_interval();
        for (int t = 0; t < space.n_intervals(); ++t) {
            const auto tt = static_cast<std::size_t>(t);
            const auto d_t = std::span<const double>(res.d).subspan(tt * n, n);
            CHECK(std::accumulate(d_t.begin(), d_t.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
            const auto& alloc = res.allocation[tt];
            double used = 0.0;
            for (std::size_t c = 0; c < alloc.mass.size(); ++c) used += alloc.admit[c] * alloc.mass[c] * space.params().e_nom;
            CHECK(used <= space.params().capacity[tt] + 1e-9);
            if (s == Scheme::fcfs) {
                for (std::size_t c = 1; c < alloc.admit.size(); ++c)
                    if (alloc.mass[c] > 0.0 && alloc.mass[c - 1] > 0.0) CHECK(alloc.admit[c] <= alloc.admit[c - 1]);
            } else {
                for (std::size_t c = 0; c < alloc.mass.size(); ++c) {
                    if (alloc.mass[c] <= 0.0) continue;
                    const double expect = std::min(1.0, space.params().capacity[tt] / (alloc.mass[c] * space.params().e_nom));
                    CHECK(alloc.admit[c] == doctest::Approx(expect).epsilon(1e-9));
                    break;
                }
            }
            // One step of the chain maps the interval onto the next.
            std::vector<double> next(n);
            chain.propagate(t, d_t, next);
            const auto tn = static_cast<std::size_t>(next_interval(space.params(), t));
            CHECK(kernels::total_variation(next, std::span<const double>(res.d).subspan(tn * n, n)) < 1e-9);
        }
    }
}

TEST_CASE("ample capacity charges everyone under both rules")
{
    ModelParams p = desk_scale();
    p.capacity.assign(p.capacity.size(), p.e_nom);
    const StateSpace space(p);
    for (Scheme s : {Scheme::fcfs, Scheme::edf}) {
        const BenchmarkChain chain(space, s);
        const auto res = benchmark_stationary(chain);
        for (const auto& alloc : res.allocation)
            for (std::size_t c = 0; c < alloc.admit.size(); ++c)
                if (alloc.mass[c] > 0.0) CHECK(alloc.admit[c] == 1.0);
    }
}

TEST_CASE("EDF waits less than FCFS on the desk instance")
{
    const StateSpace space(desk_scale());
    const BenchmarkChain fcfs(space, Scheme::fcfs), edf(space, Scheme::edf);
    const auto wf = compute_metrics(space, fcfs.block_distribution(benchmark_stationary(fcfs).d));
    const auto we = compute_metrics(space, edf.block_distribution(benchmark_stationary(edf).d));
    CHECK(we.avg_wait < wf.avg_wait);
    CHECK(we.avg_payoff >= wf.avg_payoff);
}
