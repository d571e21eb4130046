#include <doctest.h>

#include <omp.h>

#include <random>

#include "karma_ev/kernels.hpp"
#include "test_util.hpp"

using namespace karma_ev;

namespace {

struct Case {
    StateSpace space;
    TransitionTables tables;
    kernels::BlockGraph graph;
    SocialState social;

    explicit Case(ModelParams p, std::uint64_t seed)
        : space(std::move(p)), tables(space), graph(space, tables)
    {
        std::mt19937_64 rng(seed);
        const auto& params = space.params();
        std::vector<double> karma(static_cast<std::size_t>(params.n_karma()), 0.0);
        const int kb = static_cast<int>(params.k_bar);
        karma[static_cast<std::size_t>(kb - 1)] = 0.25;
        karma[static_cast<std::size_t>(kb)] = 0.5;
        karma[static_cast<std::size_t>(kb + 1)] = 0.25;
        social = {test_util::random_distribution(space, rng, karma), test_util::random_policy(space, rng)};
    }
};

}  // namespace

TEST_CASE("parallel kernels agree with the serial reference")
{
    for (auto make : {desk_scale, high_scarcity}) {
        Case c(make(), 21);
        const std::size_t n = c.space.individual_count();
        const std::size_t n_act = c.space.actions_per_interval();
        kernels::Workspace work;
        std::mt19937_64 rng(22);
        std::uniform_real_distribution<double> unif(-10.0, 0.0);
        std::vector<double> v_next(n);
        for (double& v : v_next) v = unif(rng);
        for (int t = 0; t < c.space.n_intervals(); ++t) {
            const auto tt = static_cast<std::size_t>(t);
            const auto d_t = std::span<const double>(c.social.d).subspan(tt * n, n);
            const auto pi_t = std::span<const double>(c.social.pi).subspan(tt * n_act, n_act);
            const auto snap = make_snapshot(c.space, t, d_t, pi_t, AuctionRule::smoothed);

            std::vector<double> a(n), b(n);
            kernels::propagate_serial(c.space, c.tables, snap, d_t, pi_t, a);
            kernels::propagate_parallel(c.space, c.graph, snap, d_t, pi_t, b, work);
            REQUIRE(test_util::max_abs_diff(a, b) <= 1e-12);

            const double disc = t == c.space.n_intervals() - 1 ? 0.99 : 1.0;
            std::vector<double> va(n), vb(n), qa(n_act), qb(n_act);
            kernels::backup_serial(c.space, c.tables, snap, disc, v_next, pi_t, va, qa);
            kernels::backup_parallel(c.space, c.graph, snap, disc, v_next, pi_t, vb, qb, work);
            REQUIRE(test_util::max_abs_diff(va, vb) <= 1e-12);
            REQUIRE(test_util::max_abs_diff(qa, qb) <= 1e-12);
        }
    }
}

TEST_CASE("parallel kernels do not depend on the thread count")
{
    Case c(desk_scale(), 23);
    const std::size_t n = c.space.individual_count();
    const std::size_t n_act = c.space.actions_per_interval();
    const int t = 1;
    const auto d_t = std::span<const double>(c.social.d).subspan(n, n);
    const auto pi_t = std::span<const double>(c.social.pi).subspan(n_act, n_act);
    const auto snap = make_snapshot(c.space, t, d_t, pi_t, AuctionRule::smoothed);
    std::vector<double> v_next(n, -1.0);
    for (std::size_t i = 0; i < n; ++i) v_next[i] = -static_cast<double>(i % 13) / 7.0;

    std::vector<std::vector<double>> d_out, q_out;
    const int saved = omp_get_max_threads();
    for (int threads : {1, 3, 4}) {
        omp_set_num_threads(threads);
        kernels::Workspace work;
        std::vector<double> d(n), v(n), q(n_act);
        kernels::propagate_parallel(c.space, c.graph, snap, d_t, pi_t, d, work);
        kernels::backup_parallel(c.space, c.graph, snap, 1.0, v_next, pi_t, v, q, work);
        d_out.push_back(d);
        q_out.push_back(q);
    }
    omp_set_num_threads(saved);
    CHECK(d_out[0] == d_out[1]);
    CHECK(d_out[0] == d_out[2]);
    CHECK(q_out[0] == q_out[1]);
    CHECK(q_out[0] == q_out[2]);
}

TEST_CASE("propagation keeps mass")
{
    Case c(desk_scale(), 24);
    const std::size_t n = c.space.individual_count();
    const std::size_t n_act = c.space.actions_per_interval();
    kernels::Workspace work;
    for (int t = 0; t < c.space.n_intervals(); ++t) {
        const auto tt = static_cast<std::size_t>(t);
        const auto d_t = std::span<const double>(c.social.d).subspan(tt * n, n);
        const auto pi_t = std::span<const double>(c.social.pi).subspan(tt * n_act, n_act);
        const auto snap = make_snapshot(c.space, t, d_t, pi_t, AuctionRule::smoothed);
        std::vector<double> d(n);
        kernels::propagate_parallel(c.space, c.graph, snap, d_t, pi_t, d, work);
        double total = 0.0;
        for (double x : d) {
            REQUIRE(x >= 0.0);
            total += x;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("total variation")
{
    const std::vector<double> a{0.5, 0.5, 0.0}, b{0.0, 0.5, 0.5};
    CHECK(kernels::total_variation(a, b) == 0.5);
    CHECK(kernels::total_variation(a, a) == 0.0);
}
