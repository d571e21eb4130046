#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "karma_ev/model.hpp"

namespace karma_ev {

enum class AuctionRule {
    exact,      // ties at the threshold share the leftover capacity
    smoothed,   // epsilon-regularised tie share, continuous in the social state
};

template <class T>
struct Weighted {
    T value;
    double prob;
};

// ---------------------------------------------------------------------------
// Exogenous components
// ---------------------------------------------------------------------------

int next_interval(const ModelParams& params, int t);

/// Deterministic day clock: t + dt, rolling over to the first interval.
std::vector<Weighted<int>> time_kernel(const ModelParams& params, int t);

/// Probability that a user who has not arrived yet is present in the
/// interval after t. At the day end this is P^a[t_start]; otherwise the
/// Bayes-conditioned arrival P^a[t+1] / (1 - sum_{t' <= t} P^a[t']).
double arrival_hazard(const ModelParams& params, int t);

/// P[ell+ | t, ell, td, sd, s+] for ell+ = 0, 1, 2.
std::array<double, 3> presence_kernel(const ModelParams& params, int t, int ell, int td, int sd, int s_next);

struct DemandOutcome {
    int td;
    int sd;
    int u;
    double prob;
};

/// Law of the next (td, sd, u).
std::vector<DemandOutcome> demand_kernel(const ModelParams& params, int t, int ell, int td, int sd, int u);

/// SOC after this interval's charging and before any trip.
int soc_before_trip(const ModelParams& params, int ell, int s, bool charged);

/// Law of the next SOC given the allocation outcome.
std::vector<Weighted<int>> soc_kernel(const ModelParams& params, int t, int ell, int sd, int s, bool charged);

// ---------------------------------------------------------------------------
// Auction
// ---------------------------------------------------------------------------

/// nu[b | t]: bid mass of the eligible population; null actions add nothing.
std::vector<double> bid_distribution(const StateSpace& space, std::span<const double> d_t,
                                     std::span<const double> pi_t);

/// Smallest bid that is still among the capacity-many highest bidders.
int threshold_bid(std::span<const double> nu, double capacity, double e_nom);

/// P[e = e_nom | t, b] under either tie rule.
///
/// The smoothed rule evaluates, for the bid b itself,
///   0                                        if sum_{b'>b} nu e > c
///   1                                        if (sum_{b'>=b} nu + eps) e <= c
///   min{(c - sum_{b'>b} nu e) / ((nu[b] + eps) e), 1}  otherwise,
/// which coincides with the threshold tie share at b = b* and is continuous
/// in nu for eps > 0. The exact rule throws ModelError if a tie share is
/// needed while nu[b*] = 0.
double admission_probability(std::span<const double> nu, int bid, double capacity, double e_nom, AuctionRule rule,
                             double epsilon);

struct AuctionSnapshot {
    int t = 0;
    std::vector<double> nu;
    int b_star = 0;
    std::vector<double> admit_prob;         // smoothed rule, per bid
    std::vector<double> admit_prob_exact;   // exact rule, per bid
    double f_exact = 1.0;
    double f_eps = 1.0;
};

AuctionSnapshot make_auction(std::span<const double> nu, int t, const ModelParams& params);

// ---------------------------------------------------------------------------
// Karma
// ---------------------------------------------------------------------------

struct KarmaFlow {
    int k_pre = 0;
    double xi_bar = 0.0;
    double xi = 0.0;
    double f_k = 0.0;
};

/// Payments collected in one interval, handed back so the population mean
/// returns to k_bar without anyone exceeding k_max.
struct Redistribution {
    double xi_bar = 0.0;
    std::vector<KarmaFlow> flows;   // indexed by k_pre
};

/// Redistribution shares from the law of post-payment karma. Throws
/// ModelError if the shares would push some k+ outside [0, k_max].
Redistribution redistribute(std::span<const double> k_pre_dist, double k_bar, int k_max);

/// Law of k+ for a user holding k who bid `bid` (ignored unless charged).
std::vector<Weighted<int>> karma_kernel(const Redistribution& flow, int k, int bid, bool charged, int k_max);

// ---------------------------------------------------------------------------
// Composition
// ---------------------------------------------------------------------------

/// Everything about interval t that depends on the social state.
struct IntervalSnapshot {
    int t = 0;
    AuctionRule rule = AuctionRule::smoothed;
    AuctionSnapshot auction;
    std::vector<double> k_pre_dist;
    Redistribution karma;

    const std::vector<double>& admit() const
    {
        return rule == AuctionRule::smoothed ? auction.admit_prob : auction.admit_prob_exact;
    }
};

IntervalSnapshot make_snapshot(const StateSpace& space, int t, std::span<const double> d_t,
                               std::span<const double> pi_t, AuctionRule rule);

std::vector<IntervalSnapshot> make_snapshots(const StateSpace& space, const SocialState& social, AuctionRule rule);

/// Karma law of one interval pushed through the redistribution of `snap`.
/// For karma-conservation checks.
double mean_karma_after(const IntervalSnapshot& snap);

/// Social-state-independent tables the hot loops read.
class TransitionTables {
public:
    explicit TransitionTables(const StateSpace& space);

    double hazard(int t) const { return hazard_[static_cast<std::size_t>(t)]; }
    std::span<const DemandOutcome> fresh_demand() const { return fresh_demand_; }
    std::span<const Weighted<int>> carryover(int sd, int s_pre) const
    {
        const auto& row = carryover_[static_cast<std::size_t>(sd) * n_s_ + static_cast<std::size_t>(s_pre)];
        return row;
    }
    int desired_grid(int sd) const { return desired_grid_[static_cast<std::size_t>(sd)]; }

private:
    std::size_t n_s_ = 0;
    std::vector<double> hazard_;
    std::vector<DemandOutcome> fresh_demand_;
    std::vector<std::vector<Weighted<int>>> carryover_;
    std::vector<int> desired_grid_;
};

namespace detail {

inline std::array<double, 3> presence_probs(bool day_end, double hazard, int ell, int td, bool reached_desired)
{
    if (day_end) return {1.0 - hazard, hazard, 0.0};
    switch (ell) {
    case kAbsent:
        return {1.0 - hazard, hazard, 0.0};
    case kPresent:
        if (td > 1 || !reached_desired) return {0.0, 1.0, 0.0};
        return {0.0, 0.0, 1.0};
    default:
        return {0.0, 0.0, 1.0};
    }
}

}  // namespace detail

/// Visits every successor of (t, x~) under action `action` (the bid for an
/// eligible state, 0 for the null action) as emit(next individual index,
/// probability). Successors live in interval next_interval(t); the same
/// target may be emitted more than once.
template <class Emit>
void for_each_successor(const StateSpace& space, const TransitionTables& tables, const IntervalSnapshot& snap,
                        std::size_t ind, int action, Emit&& emit)
{
    const ModelParams& params = space.params();
    const int t = snap.t;
    const bool day_end = t == space.n_intervals() - 1;
    const IndividualState x = space.individual(ind);
    const bool eligible = space.can_bid(ind);
    const double admit = eligible ? snap.admit()[static_cast<std::size_t>(action)] : 0.0;
    const double hazard = tables.hazard(t);
    const int n_s = params.n_soc();
    const int sd_grid = tables.desired_grid(x.sd);

    const DemandOutcome frozen{x.ell == kAbsent ? x.td : (x.td > 0 ? x.td - 1 : 0), x.sd, x.u, 1.0};
    const std::span<const DemandOutcome> demand = day_end ? tables.fresh_demand() : std::span<const DemandOutcome>(&frozen, 1);

    for (int charged = 0; charged < 2; ++charged) {
        const double pe = charged ? admit : 1.0 - admit;
        if (pe <= 0.0) continue;
        int s_pre = x.s;
        if (x.ell == kPresent && charged) s_pre = std::min(x.s + 1, n_s - 1);
        const int k_pre = charged ? x.k - action : x.k;
        const KarmaFlow& flow = snap.karma.flows[static_cast<std::size_t>(k_pre)];
        const int k_lo = k_pre + static_cast<int>(std::floor(flow.xi));
        const double karma_prob[2] = {1.0 - flow.f_k, flow.f_k};

        const Weighted<int> stay{s_pre, 1.0};
        const std::span<const Weighted<int>> socs =
            day_end ? tables.carryover(x.sd, s_pre) : std::span<const Weighted<int>>(&stay, 1);
        for (const auto& [s_next, ps] : socs) {
            const auto pl = detail::presence_probs(day_end, hazard, x.ell, x.td, s_next >= sd_grid);
            for (int ell_next = 0; ell_next < 3; ++ell_next) {
                if (pl[static_cast<std::size_t>(ell_next)] <= 0.0) continue;
                const double p_path = pe * ps * pl[static_cast<std::size_t>(ell_next)];
                for (const DemandOutcome& dm : demand) {
                    const double p_dem = p_path * dm.prob;
                    const std::size_t base = space.individual_index({ell_next, dm.td, dm.sd, dm.u, s_next, 0});
                    for (int j = 0; j < 2; ++j) {
                        if (karma_prob[j] <= 0.0) continue;
                        emit(base + static_cast<std::size_t>(k_lo + j), p_dem * karma_prob[j]);
                    }
                }
            }
        }
    }
}

/// Sparse rows p[x+ | x, b] of one interval. Rows follow the action layout
/// of StateSpace; columns are individual indices of the next interval.
struct SparseKernel {
    int t = 0;
    std::vector<std::size_t> row_offset;
    std::vector<std::uint32_t> col;
    std::vector<double> prob;

    std::size_t rows() const { return row_offset.empty() ? 0 : row_offset.size() - 1; }
};

SparseKernel compose_transition(const StateSpace& space, const TransitionTables& tables, const IntervalSnapshot& snap);

/// Composed kernels of every interval at the given social state.
std::vector<SparseKernel> compose_transition(const StateSpace& space, const SocialState& social,
                                             AuctionRule rule = AuctionRule::smoothed);

}  // namespace karma_ev
