#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "karma_ev/benchmarks.hpp"
#include "karma_ev/metrics.hpp"

namespace karma_ev {

struct SimConfig {
    int n_agents = 10000;
    int n_days = 2000;        // recorded days
    int burn_in_days = 20;    // simulated before recording starts
    std::uint64_t seed = 0;
    Scheme scheme = Scheme::karma;
    int batches = 20;         // batch means for the standard errors
    bool trace = true;
};

/// One interval of one recorded day, taken before the allocation.
struct TraceRow {
    int day = 0;
    int t = 0;
    double occupancy = 0.0;
    int slots = 0;
    int b_star = -1;   // threshold bid; -1 for the priority schemes
    int admitted = 0;
    double mean_karma = 0.0;
};

struct SimResult {
    std::vector<TraceRow> trace;
    /// Time-averaged state frequencies, T x individual_count() for karma and
    /// T x blocks for the priority schemes.
    std::vector<double> frequency;
    MetricsBundle metrics;      // of the block frequencies
    double se_wait = 0.0;       // batch-means standard errors
    double se_payoff = 0.0;
    double mean_karma = 0.0;    // over all recorded intervals
    double max_karma_deviation = 0.0;   // largest |mean karma - k_bar| of any recorded interval
    int max_admitted_over_slots = 0;    // largest admitted - slots, never positive
};

/// Finite-population run of the mechanism. Every present user below s_max
/// is eligible. Slots per interval are c[t] n / e_nom rounded to the
/// nearest integer. Under karma, bids are drawn from pi, the highest
/// bidders win, ties at the margin are broken uniformly at random, winners
/// pay their bid and the payments are returned by the redistribution of the
/// mean-field model applied to the empirical post-payment karma, each agent
/// rounding its share stochastically. The priority schemes rank users as
/// their mean-field chains do.
///
/// `initial` is a distribution over individual states at the day end that
/// the agents are laid out on deterministically; empty means everyone
/// unarrived with karma k_bar. `pi` is required for karma only. Throws
/// ModelError if the policy does not match the state space. Deterministic
/// given the seed.
SimResult run_simulation(const StateSpace& space, const SimConfig& config, std::span<const double> pi,
                         std::span<const double> initial = {});

}  // namespace karma_ev
