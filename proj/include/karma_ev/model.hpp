#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace karma_ev {

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Scalars, grids and exogenous laws of the charging economy.
///
/// Physical quantities are stored in their natural units (hours, kWh,
/// tokens); the state space works on grid indices derived from them.
/// Tensors are stored row-major:
///   demand        [deadline][desired soc][urgency]
///   soc_carryover [desired soc][soc before trip][next-day soc]
struct ModelParams {
    double delta_t = 1.0;   // [hr]
    double t_start = 7.0;   // clock hour of the first interval
    double t_end = 19.0;    // clock hour of the last interval
    double e_nom = 8.0;     // [kWh] per interval of charging

    std::vector<double> capacity;   // c[t] [kWh/user], one per interval

    double s_max = 64.0;    // [kWh]
    double td_max = 8.0;    // [hr]
    int k_max = 18;
    double k_bar = 9.0;

    std::vector<double> urgency_levels;
    std::vector<double> desired_soc_levels;   // [kWh], on the SOC grid

    std::vector<double> arrival;   // P^a[t], one per interval
    std::vector<double> demand;
    double epsilon = 1e-4;
    double delta_end = 0.99;
    std::vector<double> soc_carryover;

    int n_intervals() const;
    int n_deadlines() const;
    int n_soc() const;
    int n_desired() const { return static_cast<int>(desired_soc_levels.size()); }
    int n_urgency() const { return static_cast<int>(urgency_levels.size()); }
    int n_karma() const { return k_max + 1; }

    double clock(int t) const { return t_start + delta_t * t; }
    double soc_value(int s) const { return e_nom * (s + 1); }
    double deadline_value(int td) const { return delta_t * td; }

    // Grid lookups from physical values; throw ModelError when off-grid.
    int interval_index(double clock_hr) const;
    int soc_index(double kwh) const;
    int deadline_index(double hr) const;
    int desired_index(double kwh) const;
    int urgency_index(double u) const;

    /// SOC grid index of the i-th desired SOC level.
    int desired_soc_grid_index(int sd) const;

    double demand_prob(int td, int sd, int u) const;
    double carryover_prob(int sd, int s_pre, int s_next) const;

    /// Marginal law of urgency under the demand distribution.
    std::vector<double> urgency_marginal() const;

    /// Throws ModelError describing the first violated invariant.
    void validate() const;
};

/// Product-form demand law from independent marginals over the deadline
/// grid, the desired SOC levels and the urgency levels.
void set_product_demand(ModelParams& params, const std::vector<double>& deadline_probs,
                        const std::vector<double>& desired_probs,
                        const std::vector<double>& urgency_probs);

/// Deterministic carryover s_start = max{s_end - s_d + e_nom, e_nom}: no
/// external charging, a reserve of one charging step kept after each trip.
void set_trip_carryover(ModelParams& params);

ModelParams moderate_scarcity();
ModelParams high_scarcity();

/// Reduced instance used for quick equilibrium runs: 6 intervals,
/// k_max = 8, s_max = 24 kWh, two deadlines, two urgency levels.
ModelParams desk_scale();

enum Presence : int { kAbsent = 0, kPresent = 1, kDeparted = 2 };

/// A point of the state space; every component is a grid index.
struct FullState {
    int t = 0;
    int ell = 0;
    int td = 0;
    int sd = 0;
    int u = 0;
    int s = 0;
    int k = 0;

    friend bool operator==(const FullState&, const FullState&) = default;
};

/// The time-independent part of a state.
struct IndividualState {
    int ell = 0;
    int td = 0;
    int sd = 0;
    int u = 0;
    int s = 0;
    int k = 0;
};

/// Dense indexing of the state space in lexicographic order
/// (t, ell, td, sd, u, s, k), plus the layout of the per-state action
/// lists. Bid-eligible states own actions {0..k}; every other state owns a
/// single null action.
class StateSpace {
public:
    explicit StateSpace(ModelParams params);

    const ModelParams& params() const { return params_; }

    int n_intervals() const { return n_t_; }
    std::size_t individual_count() const { return n_ind_; }
    std::size_t size() const { return n_ind_ * static_cast<std::size_t>(n_t_); }

    std::size_t index(const FullState& x) const;
    FullState state(std::size_t i) const;

    std::size_t individual_index(const IndividualState& x) const
    {
        return static_cast<std::size_t>(x.ell) * stride_ell_ + static_cast<std::size_t>(x.td) * stride_td_ +
               static_cast<std::size_t>(x.sd) * stride_sd_ + static_cast<std::size_t>(x.u) * stride_u_ +
               static_cast<std::size_t>(x.s) * stride_s_ + static_cast<std::size_t>(x.k);
    }
    IndividualState individual(std::size_t i) const;

    std::vector<FullState> enumerate() const;

    bool can_bid(int ell, int s) const { return ell == kPresent && s + 1 < n_s_; }
    bool can_bid(std::size_t ind) const { return can_bid_[ind] != 0; }

    /// Number of actions of an individual state (k + 1 bids, or 1 null).
    int action_count(std::size_t ind) const { return action_count_[ind]; }
    std::size_t action_offset(std::size_t ind) const { return action_offset_[ind]; }
    std::size_t actions_per_interval() const { return n_act_; }
    std::size_t action_count() const { return n_act_ * static_cast<std::size_t>(n_t_); }

    /// r[t, x~] for every state, full-index order.
    const std::vector<double>& payoffs() const { return payoff_; }
    double payoff(int t, std::size_t ind) const { return payoff_[static_cast<std::size_t>(t) * n_ind_ + ind]; }

    std::size_t stride_ell() const { return stride_ell_; }
    std::size_t stride_td() const { return stride_td_; }
    std::size_t stride_sd() const { return stride_sd_; }
    std::size_t stride_u() const { return stride_u_; }
    std::size_t stride_s() const { return stride_s_; }

private:
    ModelParams params_;
    int n_t_ = 0, n_td_ = 0, n_sd_ = 0, n_u_ = 0, n_s_ = 0, n_k_ = 0;
    std::size_t stride_ell_ = 0, stride_td_ = 0, stride_sd_ = 0, stride_u_ = 0, stride_s_ = 0;
    std::size_t n_ind_ = 0;
    std::size_t n_act_ = 0;
    std::vector<unsigned char> can_bid_;
    std::vector<int> action_count_;
    std::vector<std::size_t> action_offset_;
    std::vector<double> payoff_;
};

/// Bids available in (ell, s, k); empty means only the null action.
std::vector<int> bid_set(int ell, int s, int k, const ModelParams& params);

/// Immediate payoff r[x]; never positive, independent of the bid.
double immediate_payoff(const FullState& x, const ModelParams& params);

/// Time-conditional state distribution d[x~ | t] (interval-major, one
/// block of individual_count() entries per interval) together with the
/// symmetric policy pi[b | x] laid out by StateSpace::action_offset.
struct SocialState {
    std::vector<double> d;
    std::vector<double> pi;
};

/// Policy that is uniform over the legal bids of every state.
std::vector<double> uniform_policy(const StateSpace& space);

/// Throws ModelError unless every d[.|t] and pi[.|x] sums to one within tol
/// and all entries are non-negative.
void check_social_state(const StateSpace& space, const SocialState& social, double tol = 1e-9);

}  // namespace karma_ev
