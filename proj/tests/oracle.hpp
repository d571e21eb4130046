#pragma once

// Dense reference dynamics for instances small enough to enumerate. Only
// the exogenous laws (arrival, demand, carryover, payoffs) and the state
// indexing come from the library; the auction, the redistribution and
// every transition case are written out again here from the model
// equations.

#include <span>
#include <vector>

#include "karma_ev/model.hpp"

namespace oracle {

using karma_ev::StateSpace;

/// 2 intervals, 2 SOC levels, 2 deadlines, 2 urgencies, k_max = 2.
/// 144 states.
karma_ev::ModelParams tiny_params(double capacity = 4.0);

/// Quantities of one interval that depend on the social state.
struct Interval {
    std::vector<double> nu;
    int b_star = 0;
    std::vector<double> admit;   // P^eps[e = e_nom | b]
    std::vector<double> k_pre;   // P[k^p]
    double xi_bar = 0.0;
    std::vector<double> xi;      // xi[k^p]
};

Interval interval(const StateSpace& space, int t, std::span<const double> d_t, std::span<const double> pi_t);

/// p[x+ | x, b] by summing over every intermediate (e, s^p, s+, l+,
/// demand+, k^p, k+). Rows follow the action layout of StateSpace,
/// columns are individual indices.
std::vector<std::vector<double>> kernel(const StateSpace& space, int t, const Interval& iv);

/// Everyone unarrived at the day end, s at the lowest level, k = k_bar
/// (must be an integer here), demand from phi.
std::vector<double> seed(const StateSpace& space);

/// Plain power iteration around the day cycle; the interval quantities
/// are recomputed from the current iterate every step.
std::vector<double> stationary(const StateSpace& space, std::span<const double> pi, int cycles);

/// V for every state: `horizon` days rolled backwards from zero
/// terminal values, the interval quantities frozen at d.
std::vector<double> values(const StateSpace& space, std::span<const double> d, std::span<const double> pi,
                           int horizon);

}  // namespace oracle
