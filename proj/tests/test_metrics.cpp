#include <doctest.h>

#include <cmath>
#include <random>

#include "karma_ev/benchmarks.hpp"
#include "karma_ev/metrics.hpp"

using namespace karma_ev;

namespace {

std::size_t block_of(const StateSpace& space, const IndividualState& x)
{
    return space.individual_index(x) / static_cast<std::size_t>(space.params().n_karma());
}

}  // namespace

TEST_CASE("nobody waiting")
{
    const StateSpace space(moderate_scarcity());
    const std::size_t nb = space.individual_count() / 19;
    std::vector<double> blocks(nb * 13, 0.0);
    for (int t = 0; t < 13; ++t) blocks[static_cast<std::size_t>(t) * nb + block_of(space, {kAbsent, 3, 0, 0, 0, 0})] = 1.0;
    const auto m = compute_metrics(space, blocks);
    CHECK(m.avg_wait == 0.0);
    CHECK(m.avg_payoff == 0.0);
}

TEST_CASE("a tenth of the users waiting in every interval")
{
    const StateSpace space(moderate_scarcity());
    const ModelParams& p = space.params();
    const std::size_t nb = space.individual_count() / 19;
    std::vector<double> blocks(nb * 13, 0.0);
    const int sd = p.desired_index(32.0), s = p.soc_index(24.0), u = p.urgency_index(1.0);
    for (int t = 0; t < 13; ++t) {
        const auto off = static_cast<std::size_t>(t) * nb;
        blocks[off + block_of(space, {kPresent, 0, sd, u, s, 0})] = 0.1;
        blocks[off + block_of(space, {kDeparted, 0, sd, u, s, 0})] = 0.9;
    }
    const auto m = compute_metrics(space, blocks);
    CHECK(m.avg_wait == doctest::Approx(1.3));
    CHECK(m.avg_wait_per_interval == doctest::Approx(0.1));
    CHECK(m.avg_payoff == doctest::Approx(-1.3));
    CHECK(m.wait_by_urgency(u) == doctest::Approx(1.3 / 0.75));
    for (double o : m.occupancy) CHECK(o == doctest::Approx(0.1));
    CHECK(m.admission_fraction[0] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("urgency mixture identity and zero-probability urgency")
{
    const StateSpace space(desk_scale());
    const BenchmarkChain chain(space, Scheme::fcfs);
    const auto m = compute_metrics(space, chain.block_distribution(benchmark_stationary(chain).d));
    double mix = 0.0;
    for (int u = 0; u < space.params().n_urgency(); ++u) mix += m.urgency_prob[static_cast<std::size_t>(u)] * m.wait_by_urgency(u);
    CHECK(std::abs(mix - m.avg_wait) < 1e-9);
    CHECK(m.avg_payoff <= 0.0);
    for (double o : m.occupancy) {
        CHECK(o >= 0.0);
        CHECK(o <= 1.0);
    }

    ModelParams p = desk_scale();
    std::vector<double> deadline(static_cast<std::size_t>(p.n_deadlines()), 0.0);
    deadline[static_cast<std::size_t>(p.deadline_index(4.0))] = 1.0;
    set_product_demand(p, deadline, {0.5, 0.5}, {1.0, 0.0});
    const StateSpace one(p);
    const BenchmarkChain c1(one, Scheme::edf);
    const auto m1 = compute_metrics(one, c1.block_distribution(benchmark_stationary(c1).d));
    CHECK_NOTHROW(m1.wait_by_urgency(0));
    CHECK_THROWS_AS(m1.wait_by_urgency(1), ModelError);
}

TEST_CASE("average payoff matches a long rollout of the frozen chain")
{
    const StateSpace space(desk_scale());
    const BenchmarkChain chain(space, Scheme::fcfs);
    const auto res = benchmark_stationary(chain);
    const auto m = compute_metrics(space, chain.block_distribution(res.d));
    REQUIRE(m.avg_payoff < 0.0);

    const int nt = space.n_intervals();
    const std::size_t n = chain.states_per_interval();
    const auto nk = static_cast<std::size_t>(space.params().n_karma());
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    // Start from a draw of the day-end distribution.
    std::size_t x = 0;
    {
        double r = unif(rng), acc = 0.0;
        const std::size_t off = static_cast<std::size_t>(nt - 1) * n;
        for (x = 0; x + 1 < n; ++x)
            if ((acc += res.d[off + x]) >= r) break;
    }
    int t = nt - 1;
    const long steps = 1'000'000;
    const int batches = 50;
    const long days = steps / nt;
    const long per_batch = days / batches;
    std::vector<double> batch(batches, 0.0);
    long day = -1;   // the partial first day is dropped
    for (long k = 0; k < steps; ++k) {
        if (t == 0) ++day;
        if (day >= 0 && day < per_batch * batches)
            batch[static_cast<std::size_t>(day / per_batch)] += space.payoff(t, (x / chain.cohorts()) * nk);
        const int c = chain.priority_class(x);
        const double admit = c < 0 ? 0.0 : res.allocation[static_cast<std::size_t>(t)].admit[static_cast<std::size_t>(c)];
        const auto next = chain.successors(t, x, admit);
        double r = unif(rng), acc = 0.0;
        std::size_t pick = next.back().value;
        for (const auto& w : next)
            if ((acc += w.prob) >= r) {
                pick = w.value;
                break;
            }
        x = pick;
        t = next_interval(space.params(), t);
    }
    double mean = 0.0, var = 0.0;
    for (double& b : batch) mean += (b /= static_cast<double>(per_batch)) / batches;
    for (double b : batch) var += (b - mean) * (b - mean) / (batches - 1);
    const double se = std::sqrt(var / batches);
    CHECK(std::abs(mean - m.avg_payoff) < 3.0 * se);
}

TEST_CASE("block distribution sums karma out")
{
    const StateSpace space(desk_scale());
    std::vector<double> d(space.size(), 0.0);
    d[space.index({2, kPresent, 1, 0, 1, 0, 3})] = 0.25;
    d[space.index({2, kPresent, 1, 0, 1, 0, 5})] = 0.75;
    const auto b = block_distribution(space, d);
    const std::size_t nb = space.individual_count() / 9;
    CHECK(b.size() == nb * 6);
    CHECK(b[2 * nb + block_of(space, {kPresent, 1, 0, 1, 0, 0})] == 1.0);
}
