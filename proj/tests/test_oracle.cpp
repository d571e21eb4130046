#include <doctest.h>

#include <random>

#include "karma_ev/equilibrium.hpp"
#include "karma_ev/kernels.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace karma_ev;

namespace {

std::vector<double> dense_row(const SparseKernel& k, std::size_t r, std::size_t n)
{
    std::vector<double> row(n, 0.0);
    for (std::size_t j = k.row_offset[r]; j < k.row_offset[r + 1]; ++j) row[k.col[j]] += k.prob[j];
    return row;
}

}  // namespace

TEST_CASE("tiny instance has at most 200 states")
{
    const StateSpace space(oracle::tiny_params());
    CHECK(space.size() == 144);
    CHECK(space.size() <= 200);
}

TEST_CASE("composed kernel equals brute-force enumeration on the tiny instance")
{
    const double karma[3] = {0.25, 0.5, 0.25};
    int with_threshold = 0;
    for (const double c : {4.0, 2.0, 6.0, 1.0, 0.5, 0.25}) {
        const StateSpace space(oracle::tiny_params(c));
        const TransitionTables tables(space);
        std::mt19937_64 rng(static_cast<std::uint64_t>(c * 100));
        for (int rep = 0; rep < 5; ++rep) {
            SocialState social{test_util::random_distribution(space, rng, karma), test_util::random_policy(space, rng)};
            const auto composed = compose_transition(space, social, AuctionRule::smoothed);
            const std::size_t n = space.individual_count();
            const std::size_t n_act = space.actions_per_interval();
            for (int t = 0; t < space.n_intervals(); ++t) {
                const auto tt = static_cast<std::size_t>(t);
                const auto iv = oracle::interval(space, t, std::span(social.d).subspan(tt * n, n),
                                                 std::span(social.pi).subspan(tt * n_act, n_act));
                if (iv.b_star > 0) ++with_threshold;
                const auto brute = oracle::kernel(space, t, iv);
                REQUIRE(composed[tt].rows() == brute.size());
                double worst = 0.0;
                bool same_support = true;
                for (std::size_t r = 0; r < brute.size(); ++r) {
                    const auto row = dense_row(composed[tt], r, n);
                    for (std::size_t j = 0; j < n; ++j) {
                        worst = std::max(worst, std::abs(row[j] - brute[r][j]));
                        same_support = same_support && ((row[j] > 0.0) == (brute[r][j] > 0.0));
                    }
                }
                CHECK(same_support);
                CHECK(worst <= 1e-15);
            }
        }
    }
    // Scarce capacities must have exercised a positive threshold somewhere.
    CHECK(with_threshold > 0);
}

TEST_CASE("stationary distribution matches dense power iteration on the tiny instance")
{
    const StateSpace space(oracle::tiny_params());
    std::mt19937_64 rng(11);
    const auto pi = test_util::random_policy(space, rng);
    StationaryOptions opts;
    opts.tol = 1e-13;
    const auto lib = stationary_distribution(space, pi, opts);
    REQUIRE(lib.converged);
    const auto ref = oracle::stationary(space, pi, 3000);
    const std::size_t n = space.individual_count();
    for (int t = 0; t < space.n_intervals(); ++t) {
        const auto tt = static_cast<std::size_t>(t);
        CHECK(kernels::total_variation(std::span(lib.d).subspan(tt * n, n), std::span(ref).subspan(tt * n, n)) <
              1e-9);
    }
}

TEST_CASE("values match the truncated-horizon oracle on the tiny instance")
{
    const StateSpace space(oracle::tiny_params());
    std::mt19937_64 rng(12);
    const auto pi = test_util::random_policy(space, rng);
    StationaryOptions sopts;
    sopts.tol = 1e-13;
    SocialState social{stationary_distribution(space, pi, sopts).d, pi};
    ValueOptions vopts;
    vopts.tol = 1e-12;
    const auto lib = evaluate_values(space, social, vopts);
    REQUIRE(lib.converged);
    const auto ref = oracle::values(space, oracle::stationary(space, pi, 3000), pi, 10000);
    CHECK(test_util::max_abs_diff(lib.V, ref) < 1e-6);
}
