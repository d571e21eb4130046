#include "karma_ev/transitions.hpp"

#include <algorithm>
#include <numeric>

namespace karma_ev {

namespace {

// Slack for comparing accumulated bid mass against capacity.
constexpr double kMassSlack = 1e-12;

bool day_end(const ModelParams& params, int t) { return t == params.n_intervals() - 1; }

}  // namespace

int next_interval(const ModelParams& params, int t) { return day_end(params, t) ? 0 : t + 1; }

std::vector<Weighted<int>> time_kernel(const ModelParams& params, int t) { return {{next_interval(params, t), 1.0}}; }

double arrival_hazard(const ModelParams& params, int t)
{
    if (day_end(params, t)) return params.arrival.front();
    const double next = params.arrival[static_cast<std::size_t>(t) + 1];
    if (next <= 0.0) return 0.0;
    double arrived = 0.0;
    for (int s = 0; s <= t; ++s) arrived += params.arrival[static_cast<std::size_t>(s)];
    const double remaining = 1.0 - arrived;
    if (remaining <= 1e-15) throw ModelError("arrival hazard undefined: no unarrived users remain");
    return std::min(1.0, next / remaining);
}

std::array<double, 3> presence_kernel(const ModelParams& params, int t, int ell, int td, int sd, int s_next)
{
    const double hazard = ell == kAbsent || day_end(params, t) ? arrival_hazard(params, t) : 0.0;
    return detail::presence_probs(day_end(params, t), hazard, ell, td, s_next >= params.desired_soc_grid_index(sd));
}

std::vector<DemandOutcome> demand_kernel(const ModelParams& params, int t, int ell, int td, int sd, int u)
{
    if (day_end(params, t)) {
        std::vector<DemandOutcome> out;
        for (int a = 0; a < params.n_deadlines(); ++a)
            for (int b = 0; b < params.n_desired(); ++b)
                for (int c = 0; c < params.n_urgency(); ++c) {
                    const double p = params.demand_prob(a, b, c);
                    if (p > 0.0) out.push_back({a, b, c, p});
                }
        return out;
    }
    if (ell == kAbsent) return {{td, sd, u, 1.0}};
    return {{std::max(td - 1, 0), sd, u, 1.0}};
}

int soc_before_trip(const ModelParams& params, int ell, int s, bool charged)
{
    if (ell == kPresent && charged) return std::min(s + 1, params.n_soc() - 1);
    return s;
}

std::vector<Weighted<int>> soc_kernel(const ModelParams& params, int t, int ell, int sd, int s, bool charged)
{
    const int s_pre = soc_before_trip(params, ell, s, charged);
    if (!day_end(params, t)) return {{s_pre, 1.0}};
    std::vector<Weighted<int>> out;
    for (int s_next = 0; s_next < params.n_soc(); ++s_next) {
        const double p = params.carryover_prob(sd, s_pre, s_next);
        if (p > 0.0) out.push_back({s_next, p});
    }
    return out;
}

std::vector<double> bid_distribution(const StateSpace& space, std::span<const double> d_t,
                                     std::span<const double> pi_t)
{
    std::vector<double> nu(static_cast<std::size_t>(space.params().n_karma()), 0.0);
    for (std::size_t i = 0; i < space.individual_count(); ++i) {
        if (!space.can_bid(i) || d_t[i] == 0.0) continue;
        const std::size_t off = space.action_offset(i);
        for (int b = 0; b < space.action_count(i); ++b)
            nu[static_cast<std::size_t>(b)] += d_t[i] * pi_t[off + static_cast<std::size_t>(b)];
    }
    return nu;
}

int threshold_bid(std::span<const double> nu, double capacity, double e_nom)
{
    const double total = std::accumulate(nu.begin(), nu.end(), 0.0);
    if (total * e_nom < capacity - kMassSlack) return 0;
    double above = 0.0;
    for (int b = static_cast<int>(nu.size()) - 1; b >= 0; --b) {
        above += nu[static_cast<std::size_t>(b)];
        if (above * e_nom >= capacity - kMassSlack) return b;
    }
    return 0;
}

namespace {

double mass_above(std::span<const double> nu, int bid)
{
    double above = 0.0;
    for (std::size_t b = static_cast<std::size_t>(bid) + 1; b < nu.size(); ++b) above += nu[b];
    return above;
}

double exact_tie_share(std::span<const double> nu, int b_star, double capacity, double e_nom)
{
    const double total = std::accumulate(nu.begin(), nu.end(), 0.0);
    if (total * e_nom < capacity - kMassSlack) return 1.0;
    const double at = nu[static_cast<std::size_t>(b_star)];
    if (at <= 0.0) throw ModelError("exact auction: tie share requested with no mass at the threshold bid");
    const double share = (capacity - mass_above(nu, b_star) * e_nom) / (at * e_nom);
    return std::clamp(share, 0.0, 1.0);
}

double smoothed_share(std::span<const double> nu, int bid, double capacity, double e_nom, double epsilon)
{
    const double above = mass_above(nu, bid);
    if (above * e_nom > capacity) return 0.0;
    const double at = nu[static_cast<std::size_t>(bid)];
    if ((above + at + epsilon) * e_nom <= capacity) return 1.0;
    return std::min((capacity - above * e_nom) / ((at + epsilon) * e_nom), 1.0);
}

}  // namespace

double admission_probability(std::span<const double> nu, int bid, double capacity, double e_nom, AuctionRule rule,
                             double epsilon)
{
    if (bid < 0 || static_cast<std::size_t>(bid) >= nu.size()) throw ModelError("bid outside the karma range");
    if (rule == AuctionRule::smoothed) return smoothed_share(nu, bid, capacity, e_nom, epsilon);
    const double total = std::accumulate(nu.begin(), nu.end(), 0.0);
    if (total * e_nom < capacity - kMassSlack) return 1.0;
    const int b_star = threshold_bid(nu, capacity, e_nom);
    if (bid > b_star) return 1.0;
    if (bid < b_star) return 0.0;
    return exact_tie_share(nu, b_star, capacity, e_nom);
}

AuctionSnapshot make_auction(std::span<const double> nu, int t, const ModelParams& params)
{
    AuctionSnapshot snap;
    snap.t = t;
    snap.nu.assign(nu.begin(), nu.end());
    const double c = params.capacity[static_cast<std::size_t>(t)];
    const double e = params.e_nom;
    snap.b_star = threshold_bid(nu, c, e);
    snap.f_exact = exact_tie_share(nu, snap.b_star, c, e);
    const double above = mass_above(nu, snap.b_star);
    snap.f_eps = std::clamp((c - above * e) / ((nu[static_cast<std::size_t>(snap.b_star)] + params.epsilon) * e), 0.0, 1.0);

    const std::size_t n = nu.size();
    snap.admit_prob.resize(n);
    snap.admit_prob_exact.resize(n);
    for (std::size_t b = 0; b < n; ++b) {
        const int bid = static_cast<int>(b);
        snap.admit_prob[b] = smoothed_share(nu, bid, c, e, params.epsilon);
        snap.admit_prob_exact[b] = bid > snap.b_star ? 1.0 : bid < snap.b_star ? 0.0 : snap.f_exact;
    }
    const double total = std::accumulate(nu.begin(), nu.end(), 0.0);
    if (total * e < c - kMassSlack) std::fill(snap.admit_prob_exact.begin(), snap.admit_prob_exact.end(), 1.0);
    return snap;
}

Redistribution redistribute(std::span<const double> k_pre_dist, double k_bar, int k_max)
{
    Redistribution out;
    double mean = 0.0;
    for (std::size_t k = 0; k < k_pre_dist.size(); ++k) mean += k_pre_dist[k] * static_cast<double>(k);
    double xi_bar = k_bar - mean;
    if (xi_bar < 0.0) {
        if (xi_bar < -1e-9) throw ModelError("negative redistribution share: mean karma exceeds k_bar");
        xi_bar = 0.0;
    }
    out.xi_bar = xi_bar;

    // Users within `room` tokens of k_max are topped up to k_max; everyone
    // else receives the common share xi_low. The first room tried is
    // floor(xi_bar). If xi_low then exceeds room + 1, the uncapped users
    // closest to k_max would overflow, so the capped set widens until the
    // share fits (water-filling). The mean stays at k_bar either way.
    int cap_from = k_max + 1;
    double xi_low = xi_bar;
    for (int room = static_cast<int>(std::floor(xi_bar)); room <= k_max; ++room) {
        cap_from = k_max - room;
        double capped = 0.0;
        double low_mass = 0.0;
        for (int k = 0; k <= k_max; ++k) {
            const double p = k_pre_dist[static_cast<std::size_t>(k)];
            if (k >= cap_from)
                capped += p * (k_max - k);
            else
                low_mass += p;
        }
        xi_low = low_mass > 1e-14 ? (xi_bar - capped) / low_mass : xi_bar;
        if (low_mass <= 1e-14 || xi_low <= room + 1 + 1e-12) break;
    }

    out.flows.resize(static_cast<std::size_t>(k_max) + 1);
    for (int k = 0; k <= k_max; ++k) {
        KarmaFlow& f = out.flows[static_cast<std::size_t>(k)];
        f.k_pre = k;
        f.xi_bar = xi_bar;
        double xi = k >= cap_from ? static_cast<double>(k_max - k) : xi_low;
        if (k + xi > k_max) {
            // Only tolerable where no mass sits; otherwise the mean would be lost.
            if (k + xi > k_max + 1e-9 && k_pre_dist[static_cast<std::size_t>(k)] > 1e-14)
                throw ModelError("redistribution pushes karma above k_max");
            xi = static_cast<double>(k_max - k);
        }
        f.xi = xi;
        f.f_k = xi - std::floor(xi);
    }
    return out;
}

std::vector<Weighted<int>> karma_kernel(const Redistribution& flow, int k, int bid, bool charged, int k_max)
{
    if (bid < 0 || bid > k) throw ModelError("illegal bid: exceeds karma");
    const int k_pre = charged ? k - bid : k;
    const KarmaFlow& f = flow.flows[static_cast<std::size_t>(k_pre)];
    const int lo = k_pre + static_cast<int>(std::floor(f.xi));
    std::vector<Weighted<int>> out;
    if (1.0 - f.f_k > 0.0) out.push_back({lo, 1.0 - f.f_k});
    if (f.f_k > 0.0) out.push_back({lo + 1, f.f_k});
    for (const auto& w : out)
        if (w.value < 0 || w.value > k_max) throw ModelError("karma transition leaves [0, k_max]");
    return out;
}

IntervalSnapshot make_snapshot(const StateSpace& space, int t, std::span<const double> d_t,
                               std::span<const double> pi_t, AuctionRule rule)
{
    const ModelParams& params = space.params();
    IntervalSnapshot snap;
    snap.t = t;
    snap.rule = rule;
    snap.auction = make_auction(bid_distribution(space, d_t, pi_t), t, params);
    const std::vector<double>& admit = snap.admit();

    snap.k_pre_dist.assign(static_cast<std::size_t>(params.n_karma()), 0.0);
    for (std::size_t i = 0; i < space.individual_count(); ++i) {
        const double m = d_t[i];
        if (m == 0.0) continue;
        const auto k = static_cast<std::size_t>(i % static_cast<std::size_t>(params.n_karma()));
        if (!space.can_bid(i)) {
            snap.k_pre_dist[k] += m;
            continue;
        }
        const std::size_t off = space.action_offset(i);
        for (std::size_t b = 0; b <= k; ++b) {
            const double w = m * pi_t[off + b];
            snap.k_pre_dist[k - b] += w * admit[b];
            snap.k_pre_dist[k] += w * (1.0 - admit[b]);
        }
    }
    snap.karma = redistribute(snap.k_pre_dist, params.k_bar, params.k_max);
    return snap;
}

std::vector<IntervalSnapshot> make_snapshots(const StateSpace& space, const SocialState& social, AuctionRule rule)
{
    const std::size_t n_ind = space.individual_count();
    const std::size_t n_act = space.actions_per_interval();
    std::vector<IntervalSnapshot> out;
    out.reserve(static_cast<std::size_t>(space.n_intervals()));
    for (int t = 0; t < space.n_intervals(); ++t) {
        const auto tt = static_cast<std::size_t>(t);
        out.push_back(make_snapshot(space, t, std::span(social.d).subspan(tt * n_ind, n_ind),
                                    std::span(social.pi).subspan(tt * n_act, n_act), rule));
    }
    return out;
}

double mean_karma_after(const IntervalSnapshot& snap)
{
    double mean = 0.0;
    for (const KarmaFlow& f : snap.karma.flows) mean += snap.k_pre_dist[static_cast<std::size_t>(f.k_pre)] * (f.k_pre + f.xi);
    return mean;
}

TransitionTables::TransitionTables(const StateSpace& space)
{
    const ModelParams& params = space.params();
    n_s_ = static_cast<std::size_t>(params.n_soc());
    const int nt = params.n_intervals();
    hazard_.resize(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) hazard_[static_cast<std::size_t>(t)] = arrival_hazard(params, t);
    fresh_demand_ = demand_kernel(params, nt - 1, kAbsent, 0, 0, 0);
    carryover_.resize(static_cast<std::size_t>(params.n_desired()) * n_s_);
    for (int sd = 0; sd < params.n_desired(); ++sd)
        for (int sp = 0; sp < params.n_soc(); ++sp) {
            auto& row = carryover_[static_cast<std::size_t>(sd) * n_s_ + static_cast<std::size_t>(sp)];
            for (int s = 0; s < params.n_soc(); ++s) {
                const double p = params.carryover_prob(sd, sp, s);
                if (p > 0.0) row.push_back({s, p});
            }
        }
    for (int sd = 0; sd < params.n_desired(); ++sd) desired_grid_.push_back(params.desired_soc_grid_index(sd));
}

SparseKernel compose_transition(const StateSpace& space, const TransitionTables& tables, const IntervalSnapshot& snap)
{
    SparseKernel kernel;
    kernel.t = snap.t;
    kernel.row_offset.reserve(space.actions_per_interval() + 1);
    kernel.row_offset.push_back(0);
    std::vector<std::pair<std::uint32_t, double>> row;
    for (std::size_t i = 0; i < space.individual_count(); ++i) {
        for (int a = 0; a < space.action_count(i); ++a) {
            row.clear();
            for_each_successor(space, tables, snap, i, a, [&](std::size_t next, double p) {
                const auto col = static_cast<std::uint32_t>(next);
                for (auto& [c, q] : row)
                    if (c == col) {
                        q += p;
                        return;
                    }
                row.emplace_back(col, p);
            });
            std::sort(row.begin(), row.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
            for (const auto& [c, q] : row) {
                kernel.col.push_back(c);
                kernel.prob.push_back(q);
            }
            kernel.row_offset.push_back(kernel.col.size());
        }
    }
    return kernel;
}

std::vector<SparseKernel> compose_transition(const StateSpace& space, const SocialState& social, AuctionRule rule)
{
    const TransitionTables tables(space);
    std::vector<SparseKernel> out;
    for (const IntervalSnapshot& snap : make_snapshots(space, social, rule))
        out.push_back(compose_transition(space, tables, snap));
    return out;
}

}  // namespace karma_ev
