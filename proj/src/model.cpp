#include "karma_ev/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace karma_ev {

namespace {

constexpr double kGridTol = 1e-9;

// Number of whole steps in span, or -1 if span is not a multiple of step.
int steps_in(double span, double step)
{
    if (!(step > 0.0)) return -1;
    const double q = span / step;
    const double r = std::round(q);
    if (std::abs(q - r) > kGridTol) return -1;
    return static_cast<int>(r);
}

int find_level(const std::vector<double>& levels, double v, const char* what)
{
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (std::abs(levels[i] - v) <= kGridTol) return static_cast<int>(i);
    std::ostringstream msg;
    msg << what << " " << v << " is not a configured level";
    throw ModelError(msg.str());
}

[[noreturn]] void fail(const std::string& msg) { throw ModelError("invalid parameters: " + msg); }

}  // namespace

int ModelParams::n_intervals() const
{
    const int n = steps_in(t_end - t_start, delta_t);
    return n < 0 ? 0 : n + 1;
}

int ModelParams::n_deadlines() const
{
    const int n = steps_in(td_max, delta_t);
    return n < 0 ? 0 : n + 1;
}

int ModelParams::n_soc() const
{
    const int n = steps_in(s_max, e_nom);
    return n < 0 ? 0 : n;
}

int ModelParams::interval_index(double clock_hr) const
{
    const int i = steps_in(clock_hr - t_start, delta_t);
    if (i < 0 || i >= n_intervals()) throw ModelError("clock time off the day grid");
    return i;
}

int ModelParams::soc_index(double kwh) const
{
    const int i = steps_in(kwh, e_nom);
    if (i < 1 || i > n_soc()) throw ModelError("SOC off the grid");
    return i - 1;
}

int ModelParams::deadline_index(double hr) const
{
    const int i = steps_in(hr, delta_t);
    if (i < 0 || i >= n_deadlines()) throw ModelError("deadline off the grid");
    return i;
}

int ModelParams::desired_index(double kwh) const { return find_level(desired_soc_levels, kwh, "desired SOC"); }

int ModelParams::urgency_index(double u) const { return find_level(urgency_levels, u, "urgency"); }

int ModelParams::desired_soc_grid_index(int sd) const { return soc_index(desired_soc_levels[static_cast<std::size_t>(sd)]); }

double ModelParams::demand_prob(int td, int sd, int u) const
{
    return demand[(static_cast<std::size_t>(td) * n_desired() + sd) * n_urgency() + u];
}

double ModelParams::carryover_prob(int sd, int s_pre, int s_next) const
{
    const std::size_t ns = static_cast<std::size_t>(n_soc());
    return soc_carryover[(static_cast<std::size_t>(sd) * ns + s_pre) * ns + s_next];
}

std::vector<double> ModelParams::urgency_marginal() const
{
    std::vector<double> m(static_cast<std::size_t>(n_urgency()), 0.0);
    for (int td = 0; td < n_deadlines(); ++td)
        for (int sd = 0; sd < n_desired(); ++sd)
            for (int u = 0; u < n_urgency(); ++u) m[u] += demand_prob(td, sd, u);
    return m;
}

void ModelParams::validate() const
{
    if (!(delta_t > 0.0)) fail("delta_t must be positive");
    if (t_end < t_start || n_intervals() == 0) fail("day must span a whole number of intervals");
    if (!(e_nom > 0.0)) fail("e_nom must be positive");
    if (n_soc() < 1) fail("s_max must be a positive multiple of e_nom");
    if (td_max < 0.0 || n_deadlines() == 0) fail("td_max must be a non-negative multiple of delta_t");
    const auto nt = static_cast<std::size_t>(n_intervals());
    if (capacity.size() != nt) fail("capacity needs one entry per interval");
    for (double c : capacity)
        if (!(c >= 0.0) || !std::isfinite(c)) fail("capacity must be non-negative");
    if (k_max < 0) fail("k_max must be non-negative");
    if (!(k_bar >= 0.0 && k_bar <= k_max)) fail("k_bar must lie in [0, k_max]");
    if (urgency_levels.empty()) fail("no urgency levels");
    if (desired_soc_levels.empty()) fail("no desired SOC levels");
    for (double sd : desired_soc_levels) {
        const int i = steps_in(sd, e_nom);
        if (i < 1 || i > n_soc()) fail("desired SOC levels must lie on the SOC grid");
    }
    if (arrival.size() != nt) fail("arrival needs one entry per interval");
    double arrivals = 0.0;
    for (double p : arrival) {
        if (!(p >= 0.0)) fail("arrival probabilities must be non-negative");
        arrivals += p;
    }
    if (arrivals > 1.0 + 1e-12) fail("arrival probabilities sum above one");

    const std::size_t nd = static_cast<std::size_t>(n_deadlines()) * n_desired() * n_urgency();
    if (demand.size() != nd) fail("demand tensor has the wrong size");
    double total = 0.0;
    for (double p : demand) {
        if (!(p >= 0.0)) fail("demand probabilities must be non-negative");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) fail("demand distribution must sum to one");

    if (!(epsilon > 0.0)) fail("epsilon must be positive");
    if (!(delta_end >= 0.0 && delta_end < 1.0)) fail("delta_end must lie in [0, 1)");

    const std::size_t ns = static_cast<std::size_t>(n_soc());
    if (soc_carryover.size() != static_cast<std::size_t>(n_desired()) * ns * ns)
        fail("soc_carryover tensor has the wrong size");
    for (std::size_t row = 0; row < static_cast<std::size_t>(n_desired()) * ns; ++row) {
        double sum = 0.0;
        for (std::size_t j = 0; j < ns; ++j) {
            const double p = soc_carryover[row * ns + j];
            if (!(p >= 0.0)) fail("soc_carryover entries must be non-negative");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) fail("soc_carryover rows must sum to one");
    }
}

void set_product_demand(ModelParams& params, const std::vector<double>& deadline_probs,
                        const std::vector<double>& desired_probs, const std::vector<double>& urgency_probs)
{
    if (deadline_probs.size() != static_cast<std::size_t>(params.n_deadlines()) ||
        desired_probs.size() != params.desired_soc_levels.size() ||
        urgency_probs.size() != params.urgency_levels.size())
        throw ModelError("demand marginals do not match the grids");
    params.demand.assign(deadline_probs.size() * desired_probs.size() * urgency_probs.size(), 0.0);
    std::size_t i = 0;
    for (double ptd : deadline_probs)
        for (double psd : desired_probs)
            for (double pu : urgency_probs) params.demand[i++] = ptd * psd * pu;
}

void set_trip_carryover(ModelParams& params)
{
    const int ns = params.n_soc();
    const int nsd = params.n_desired();
    params.soc_carryover.assign(static_cast<std::size_t>(nsd) * ns * ns, 0.0);
    for (int sd = 0; sd < nsd; ++sd) {
        const double need = params.desired_soc_levels[static_cast<std::size_t>(sd)];
        for (int sp = 0; sp < ns; ++sp) {
            const double start = std::max(params.soc_value(sp) - need + params.e_nom, params.e_nom);
            const int next = params.soc_index(start);
            params.soc_carryover[(static_cast<std::size_t>(sd) * ns + sp) * ns + next] = 1.0;
        }
    }
}

namespace {

ModelParams workplace_station(double capacity)
{
    ModelParams p;
    p.delta_t = 1.0;
    p.t_start = 7.0;
    p.t_end = 19.0;
    p.e_nom = 8.0;
    p.s_max = 64.0;
    p.td_max = 8.0;
    p.k_max = 18;
    p.k_bar = 9.0;
    p.epsilon = 1e-4;
    p.delta_end = 0.99;
    p.urgency_levels = {1.0, 9.0};
    p.desired_soc_levels = {32.0, 48.0, 64.0};
    const int nt = p.n_intervals();
    p.capacity.assign(static_cast<std::size_t>(nt), capacity);
    p.arrival.assign(static_cast<std::size_t>(nt), 0.0);
    p.arrival[0] = p.arrival[1] = p.arrival[2] = 0.25;
    p.arrival[3] = p.arrival[4] = 0.125;

    std::vector<double> deadline(static_cast<std::size_t>(p.n_deadlines()), 0.0);
    deadline[static_cast<std::size_t>(p.deadline_index(8.0))] = 0.75;
    deadline[static_cast<std::size_t>(p.deadline_index(4.0))] = 0.25;
    set_product_demand(p, deadline, {0.75, 0.2, 0.05}, {0.75, 0.25});
    set_trip_carryover(p);
    return p;
}

}  // namespace

ModelParams moderate_scarcity() { return workplace_station(8.0 / 3.0); }

ModelParams high_scarcity() { return workplace_station(2.0); }

ModelParams desk_scale()
{
    ModelParams p;
    p.delta_t = 1.0;
    p.t_start = 7.0;
    p.t_end = 12.0;
    p.e_nom = 8.0;
    p.s_max = 24.0;
    p.td_max = 4.0;
    p.k_max = 8;
    p.k_bar = 4.0;
    p.epsilon = 1e-4;
    p.delta_end = 0.99;
    p.urgency_levels = {1.0, 9.0};
    p.desired_soc_levels = {16.0, 24.0};
    p.capacity.assign(6, 2.0);
    p.arrival = {0.5, 0.3, 0.2, 0.0, 0.0, 0.0};
    std::vector<double> deadline(static_cast<std::size_t>(p.n_deadlines()), 0.0);
    deadline[static_cast<std::size_t>(p.deadline_index(4.0))] = 0.7;
    deadline[static_cast<std::size_t>(p.deadline_index(2.0))] = 0.3;
    set_product_demand(p, deadline, {0.75, 0.25}, {0.75, 0.25});
    set_trip_carryover(p);
    return p;
}

StateSpace::StateSpace(ModelParams params) : params_(std::move(params))
{
    n_t_ = params_.n_intervals();
    n_td_ = params_.n_deadlines();
    n_sd_ = params_.n_desired();
    n_u_ = params_.n_urgency();
    n_s_ = params_.n_soc();
    n_k_ = params_.n_karma();
    if (n_t_ <= 0 || n_td_ <= 0 || n_sd_ <= 0 || n_u_ <= 0 || n_s_ <= 0 || n_k_ <= 0)
        throw ModelError("state space has an empty grid");
    params_.validate();

    stride_s_ = static_cast<std::size_t>(n_k_);
    stride_u_ = stride_s_ * n_s_;
    stride_sd_ = stride_u_ * n_u_;
    stride_td_ = stride_sd_ * n_sd_;
    stride_ell_ = stride_td_ * n_td_;
    n_ind_ = stride_ell_ * 3;

    can_bid_.resize(n_ind_);
    action_count_.resize(n_ind_);
    action_offset_.resize(n_ind_);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < n_ind_; ++i) {
        const IndividualState x = individual(i);
        const bool bid = can_bid(x.ell, x.s);
        can_bid_[i] = bid ? 1 : 0;
        action_count_[i] = bid ? x.k + 1 : 1;
        action_offset_[i] = offset;
        offset += static_cast<std::size_t>(action_count_[i]);
    }
    n_act_ = offset;

    payoff_.resize(size());
    for (std::size_t i = 0; i < size(); ++i) payoff_[i] = immediate_payoff(state(i), params_);
}

std::size_t StateSpace::index(const FullState& x) const
{
    if (x.t < 0 || x.t >= n_t_ || x.ell < 0 || x.ell > 2 || x.td < 0 || x.td >= n_td_ || x.sd < 0 || x.sd >= n_sd_ ||
        x.u < 0 || x.u >= n_u_ || x.s < 0 || x.s >= n_s_ || x.k < 0 || x.k >= n_k_)
        throw ModelError("state component out of range");
    return static_cast<std::size_t>(x.t) * n_ind_ + individual_index({x.ell, x.td, x.sd, x.u, x.s, x.k});
}

IndividualState StateSpace::individual(std::size_t i) const
{
    IndividualState x;
    x.k = static_cast<int>(i % n_k_);
    i /= n_k_;
    x.s = static_cast<int>(i % n_s_);
    i /= n_s_;
    x.u = static_cast<int>(i % n_u_);
    i /= n_u_;
    x.sd = static_cast<int>(i % n_sd_);
    i /= n_sd_;
    x.td = static_cast<int>(i % n_td_);
    x.ell = static_cast<int>(i / n_td_);
    return x;
}

FullState StateSpace::state(std::size_t i) const
{
    const IndividualState x = individual(i % n_ind_);
    return {static_cast<int>(i / n_ind_), x.ell, x.td, x.sd, x.u, x.s, x.k};
}

std::vector<FullState> StateSpace::enumerate() const
{
    std::vector<FullState> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(state(i));
    return out;
}

std::vector<int> bid_set(int ell, int s, int k, const ModelParams& params)
{
    if (ell != kPresent || s + 1 >= params.n_soc()) return {};
    std::vector<int> bids(static_cast<std::size_t>(k) + 1);
    std::iota(bids.begin(), bids.end(), 0);
    return bids;
}

double immediate_payoff(const FullState& x, const ModelParams& params)
{
    if (x.ell != kPresent) return 0.0;
    const double u = params.urgency_levels[static_cast<std::size_t>(x.u)];
    const bool day_end = x.t == params.n_intervals() - 1;
    if (!day_end) return x.td == 0 ? -u : 0.0;
    // Steps still needed after the day ends versus steps left before the deadline.
    const double missing = (params.desired_soc_levels[static_cast<std::size_t>(x.sd)] - params.soc_value(x.s)) / params.e_nom;
    const double left = static_cast<double>(x.td);
    return left < missing ? -u * (missing - left) : 0.0;
}

std::vector<double> uniform_policy(const StateSpace& space)
{
    std::vector<double> pi(space.action_count());
    const std::size_t n_ind = space.individual_count();
    for (int t = 0; t < space.n_intervals(); ++t) {
        const std::size_t base = static_cast<std::size_t>(t) * space.actions_per_interval();
        for (std::size_t i = 0; i < n_ind; ++i) {
            const int n = space.action_count(i);
            std::fill_n(pi.begin() + static_cast<std::ptrdiff_t>(base + space.action_offset(i)), n, 1.0 / n);
        }
    }
    return pi;
}

void check_social_state(const StateSpace& space, const SocialState& social, double tol)
{
    if (social.d.size() != space.size() || social.pi.size() != space.action_count())
        throw ModelError("social state does not match the state space");
    const std::size_t n_ind = space.individual_count();
    for (int t = 0; t < space.n_intervals(); ++t) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n_ind; ++i) {
            const double m = social.d[static_cast<std::size_t>(t) * n_ind + i];
            if (m < -tol) throw ModelError("negative mass in d");
            sum += m;
        }
        if (std::abs(sum - 1.0) > tol) throw ModelError("d[.|t] does not sum to one");
        const std::size_t base = static_cast<std::size_t>(t) * space.actions_per_interval();
        for (std::size_t i = 0; i < n_ind; ++i) {
            double row = 0.0;
            for (int j = 0; j < space.action_count(i); ++j) {
                const double p = social.pi[base + space.action_offset(i) + static_cast<std::size_t>(j)];
                if (p < -tol) throw ModelError("negative policy entry");
                row += p;
            }
            if (std::abs(row - 1.0) > tol) throw ModelError("pi[.|x] does not sum to one");
        }
    }
}

}  // namespace karma_ev
