#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "karma_ev/transitions.hpp"

namespace karma_ev {

struct StationaryOptions {
    double tol = 1e-10;        // per-cycle total-variation change
    int max_cycles = 100000;
    AuctionRule rule = AuctionRule::smoothed;
};

struct StationaryResult {
    std::vector<double> d;
    double residual = 0.0;
    int cycles = 0;
    bool converged = false;
};

/// Everyone unarrived at the day end with s = e_nom, karma at k_bar (split
/// between the two neighbouring integers when k_bar is fractional) and
/// demand drawn from phi. Only the last interval carries mass.
std::vector<double> seed_distribution(const StateSpace& space);

/// Day-periodic distribution induced by pi, found by propagating around
/// the day cycle (the auction of each interval recomputed from the current
/// iterate). The day-end block is Anderson-mixed between cycles. Stops once
/// both the per-interval TV change of a cycle and the TV gap between the
/// day-end block before and after the cycle are below opts.tol. `warm`
/// seeds the iteration; the seed distribution is used otherwise.
/// Non-convergence is flagged, not thrown.
StationaryResult stationary_distribution(const StateSpace& space, std::span<const double> pi,
                                         const StationaryOptions& opts = {}, std::span<const double> warm = {});

struct ValueOptions {
    double tol = 1e-9;
    int max_sweeps = 200000;
    AuctionRule rule = AuctionRule::smoothed;
};

struct ValueTables {
    std::vector<double> V;   // full-state order
    std::vector<double> Q;   // action layout of StateSpace
    double bellman_residual = 0.0;
    int day_sweeps = 0;
    bool converged = false;
};

/// Values of pi at the social state under discount 1 within the day and
/// delta_end across the day boundary. The day-start values are iterated by
/// backward day sweeps with Anderson mixing until a sweep moves them by at
/// most tol / 2.
/// Throws ModelError if delta_end >= 1.
ValueTables evaluate_values(const StateSpace& space, const SocialState& social, const ValueOptions& opts = {},
                            std::span<const double> warm_v = {});

ValueTables evaluate_values(const StateSpace& space, std::span<const IntervalSnapshot> snaps,
                            std::span<const double> pi, const ValueOptions& opts, std::span<const double> warm_v = {});

/// Largest |r + delta * sum p V - V| over all states.
double bellman_residual(const StateSpace& space, std::span<const IntervalSnapshot> snaps,
                        std::span<const double> pi, std::span<const double> V);

/// Positions of every entry within tol of the row maximum.
std::vector<int> best_response(std::span<const double> q_row, double tol = 1e-9);

/// pi' = (1 - eta) pi + eta softmax(Q / temp), row by row over legal bids.
std::vector<double> policy_update(const StateSpace& space, std::span<const double> pi, std::span<const double> Q,
                                  double eta, double temp);

/// sum_{t, x~} d[x~|t] / |T| * (max_b Q[x, b] - sum_b pi[b|x] Q[x, b]).
double exploitability(const StateSpace& space, std::span<const double> d, std::span<const double> pi,
                      std::span<const double> Q);

struct IterationInfo {
    int iteration = 0;
    double exploitability = 0.0;
    double distribution_residual = 0.0;
    int cycles = 0;
    int day_sweeps = 0;
    double temperature = 0.0;
};

struct SolverOptions {
    int max_iters = 1000;
    double tol = 1e-3;
    double eta = 0.05;
    double temp_start = 1.0;
    double temp_end = 0.01;
    int anneal_iters = 500;
    std::uint64_t seed = 0;   // recorded for provenance; the dynamics are deterministic
    double dist_tol = 1e-10;
    double value_tol = 1e-9;
    int max_cycles = 100000;
    AuctionRule rule = AuctionRule::smoothed;
    std::function<void(const IterationInfo&)> on_iteration;

    /// Geometric annealing from temp_start to temp_end over anneal_iters.
    double temperature(int iteration) const;
};

enum class Termination { tolerance, max_iters };

struct SolverReport {
    int iterations = 0;
    std::vector<double> exploitability;
    std::vector<double> distribution_residual;
    double wall_seconds = 0.0;
    Termination terminated_by = Termination::max_iters;
    int best_iteration = 0;
};

/// Iterate to continue from, as stored in a checkpoint.
struct SolverState {
    int iteration = 0;
    SocialState social;
    std::vector<double> V;
};

struct SolveResult {
    SocialState social;   // best iterate, or the converged one
    ValueTables values;
    SolverReport report;
    SolverState last;     // final iterate, for resuming
};

/// Damped smoothed best-response dynamics: stationary distribution, then
/// values, then a policy step, until exploitability < tol or max_iters.
/// On non-convergence the iterate with the lowest exploitability is
/// returned.
SolveResult solve_sne(const StateSpace& space, const SolverOptions& opts, const SolverState* resume = nullptr);

}  // namespace karma_ev
