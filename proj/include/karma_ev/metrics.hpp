#pragma once

#include <span>
#include <vector>

#include "karma_ev/transitions.hpp"

namespace karma_ev {

/// Performance measures of a day-periodic distribution.
///
/// avg_wait counts, per user and day, the intervals spent present with a
/// passed deadline; avg_wait_per_interval divides it by the number of
/// intervals. avg_payoff is the matching sum of immediate payoffs.
struct MetricsBundle {
    double avg_wait = 0.0;
    double avg_wait_per_interval = 0.0;
    double avg_payoff = 0.0;
    std::vector<double> urgency_prob;        // P[u]
    std::vector<double> wait_mass;           // avg_wait contributed by each urgency
    std::vector<double> occupancy;           // P[ell = 1 | t]
    std::vector<int> b_star;                 // karma only; empty otherwise
    std::vector<double> admission_fraction;  // c[t] / e_nom

    /// Average wait of users with urgency index u. Throws ModelError if
    /// P[u] = 0.
    double wait_by_urgency(int u) const;
};

/// Sums karma out of a full distribution: T x (individual_count / n_karma).
std::vector<double> block_distribution(const StateSpace& space, std::span<const double> d);

/// Measures from a karma-free distribution laid out as T x blocks.
MetricsBundle compute_metrics(const StateSpace& space, std::span<const double> blocks, std::vector<int> b_star = {});

/// Measures of a karma social state, b* recomputed from its bid mass.
MetricsBundle compute_metrics(const StateSpace& space, const SocialState& social,
                              AuctionRule rule = AuctionRule::smoothed);

}  // namespace karma_ev
