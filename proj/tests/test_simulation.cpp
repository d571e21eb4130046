#include <doctest.h>

#include <cmath>

#include "karma_ev/simulation.hpp"

using namespace karma_ev;

TEST_CASE("a lone agent with a slot never waits")
{
    ModelParams p = desk_scale();
    p.capacity.assign(p.capacity.size(), p.e_nom);
    const StateSpace space(p);
    const auto pi = uniform_policy(space);
    for (Scheme s : {Scheme::karma, Scheme::fcfs, Scheme::edf}) {
        SimConfig c;
        c.n_agents = 1;
        c.n_days = 300;
        c.scheme = s;
        const auto r = run_simulation(space, c, pi);
        CHECK(r.metrics.avg_wait == 0.0);
        CHECK(r.metrics.avg_payoff == 0.0);
        for (const auto& row : r.trace) {
            CHECK(row.slots == 1);
            CHECK(row.admitted <= row.slots);
        }
    }
}

TEST_CASE("simulation is reproducible from its seed")
{
    const StateSpace space(desk_scale());
    const auto pi = uniform_policy(space);
    SimConfig c;
    c.n_agents = 500;
    c.n_days = 50;
    c.seed = 7;
    for (Scheme s : {Scheme::karma, Scheme::fcfs, Scheme::edf}) {
        c.scheme = s;
        const auto a = run_simulation(space, c, pi);
        const auto b = run_simulation(space, c, pi);
        CHECK(a.frequency == b.frequency);
        CHECK(a.metrics.avg_wait == b.metrics.avg_wait);
        REQUIRE(a.trace.size() == b.trace.size());
        bool same = true;
        for (std::size_t i = 0; i < a.trace.size(); ++i)
            same = same && a.trace[i].admitted == b.trace[i].admitted && a.trace[i].mean_karma == b.trace[i].mean_karma;
        CHECK(same);
        SimConfig other = c;
        other.seed = 8;
        CHECK(run_simulation(space, other, pi).frequency != a.frequency);
    }
}

TEST_CASE("auctions respect the slots and karma stays in range")
{
    const StateSpace space(desk_scale());
    const auto pi = uniform_policy(space);
    SimConfig c;
    c.n_agents = 2000;
    c.n_days = 2000;   // 12 000 recorded intervals
    c.seed = 3;
    const auto r = run_simulation(space, c, pi);
    CHECK(r.max_admitted_over_slots <= 0);
    // Mean karma drifts only through the stochastic rounding.
    CHECK(std::abs(r.mean_karma - space.params().k_bar) < 1e-3 * space.params().k_bar);
    for (const auto& row : r.trace) {
        CHECK(row.slots == 500);
        REQUIRE(row.b_star >= 0);
        REQUIRE(row.b_star <= space.params().k_max);
    }
    double total = 0.0;
    for (double f : r.frequency) total += f;
    CHECK(total == doctest::Approx(space.n_intervals()));
}

TEST_CASE("simulation input checks")
{
    const StateSpace space(desk_scale());
    SimConfig c;
    c.n_agents = 10;
    c.n_days = 2;
    CHECK_THROWS_AS(run_simulation(space, c, std::vector<double>(3, 1.0)), ModelError);
    c.n_agents = 0;
    CHECK_THROWS_AS(run_simulation(space, c, uniform_policy(space)), ModelError);
    c.n_agents = 10;
    c.scheme = Scheme::fcfs;
    CHECK_NOTHROW(run_simulation(space, c, {}));
    CHECK_THROWS_AS(run_simulation(space, c, {}, std::vector<double>(4, 0.25)), ModelError);
}
