#include "karma_ev/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace karma_ev {

namespace {

struct Agent {
    int ell, td, sd, u, s, k, cohort;
};

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <class Weights>
int sample_index(std::mt19937_64& rng, const Weights& w, int n)
{
    const double r = uniform01(rng);
    double acc = 0.0;
    int last = -1;
    for (int i = 0; i < n; ++i) {
        if (w(i) <= 0.0) continue;
        acc += w(i);
        last = i;
        if (r < acc) return i;
    }
    return last;
}

std::vector<Agent> lay_out(const StateSpace& space, std::span<const double> initial, int n_agents)
{
    std::vector<Agent> agents;
    agents.reserve(static_cast<std::size_t>(n_agents));
    double total = 0.0;
    for (double p : initial) total += p;
    double acc = 0.0;
    std::size_t i = 0;
    for (int a = 0; a < n_agents; ++a) {
        const double target = (a + 0.5) / n_agents * total;
        while (i + 1 < initial.size() && (acc + initial[i] <= target || initial[i] == 0.0)) acc += initial[i++];
        const IndividualState x = space.individual(i);
        agents.push_back({x.ell, x.td, x.sd, x.u, x.s, x.k, 0});
    }
    return agents;
}

}  // namespace

SimResult run_simulation(const StateSpace& space, const SimConfig& config, std::span<const double> pi,
                         std::span<const double> initial)
{
    const ModelParams& params = space.params();
    if (config.n_agents < 1) throw ModelError("simulation needs at least one agent");
    if (config.n_days < 1 || config.burn_in_days < 0) throw ModelError("simulation needs at least one recorded day");
    const bool karma = config.scheme == Scheme::karma;
    if (karma && pi.size() != space.action_count())
        throw ModelError("policy tables do not match the state space");

    const int nt = space.n_intervals();
    const int n_s = params.n_soc();
    const int n_td = params.n_deadlines();
    const int k_max = params.k_max;
    const auto nk = static_cast<std::size_t>(params.n_karma());
    const std::size_t n_ind = space.individual_count();
    const std::size_t n_act = space.actions_per_interval();
    const std::size_t cells = karma ? n_ind : n_ind / nk;
    const TransitionTables tables(space);
    const double n = config.n_agents;

    std::vector<double> seeded;
    if (initial.empty()) {
        seeded = seed_distribution(space);
        initial = std::span<const double>(seeded).subspan(static_cast<std::size_t>(nt - 1) * n_ind, n_ind);
    }
    if (initial.size() != n_ind) throw ModelError("initial distribution does not match the state space");
    std::vector<Agent> agents = lay_out(space, initial, config.n_agents);

    const int n_keys = karma ? k_max + 1 : (config.scheme == Scheme::fcfs ? nt : 2 * n_td);
    std::vector<int> key(agents.size()), bid(agents.size()), k_pre(agents.size());
    std::vector<char> admitted(agents.size());
    std::vector<int> count(static_cast<std::size_t>(n_keys));
    std::vector<std::size_t> marginal;
    std::vector<double> k_hist(nk);

    SimResult out;
    std::vector<double> counts(cells * static_cast<std::size_t>(nt), 0.0);
    std::vector<double> day_wait, day_payoff;
    std::vector<std::vector<int>> b_star_hist(static_cast<std::size_t>(nt), std::vector<int>(nk, 0));
    double karma_sum = 0.0;
    long long karma_obs = 0;
    out.max_admitted_over_slots = std::numeric_limits<int>::min();

    auto stream = [&](std::uint32_t tag) {
        const std::uint64_t seed = config.seed;
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
        return std::mt19937_64(seq);
    };
    double wait = 0.0, payoff = 0.0;

    auto advance = [&](int t, std::mt19937_64& rng, bool record, int day) {
        const auto tt = static_cast<std::size_t>(t);
        const bool day_end = t == nt - 1;

        // Observe the interval as the mean-field distribution would.
        long long present = 0;
        long long karma_total = 0;
        for (const Agent& a : agents) {
            const std::size_t ind = space.individual_index({a.ell, a.td, a.sd, a.u, a.s, a.k});
            if (record) {
                counts[tt * cells + (karma ? ind : ind / nk)] += 1.0;
                payoff += space.payoff(t, ind);
                if (a.ell == kPresent && a.td == 0) wait += 1.0;
            }
            present += a.ell == kPresent;
            karma_total += a.k;
        }
        const double mean_k = karma_total / n;
        if (record && karma) {
            karma_sum += mean_k;
            ++karma_obs;
            out.max_karma_deviation = std::max(out.max_karma_deviation, std::abs(mean_k - params.k_bar));
        }

        // Priorities.
        std::fill(count.begin(), count.end(), 0);
        for (std::size_t i = 0; i < agents.size(); ++i) {
            const Agent& a = agents[i];
            admitted[i] = 0;
            bid[i] = 0;
            key[i] = -1;
            if (!space.can_bid(a.ell, a.s)) continue;
            if (karma) {
                const std::size_t ind = space.individual_index({a.ell, a.td, a.sd, a.u, a.s, a.k});
                const double* row = pi.data() + tt * n_act + space.action_offset(ind);
                const int b = sample_index(rng, [&](int j) { return row[j]; }, a.k + 1);
                if (b < 0) throw ModelError("policy row without mass at a visited state");
                bid[i] = b;
                key[i] = k_max - b;
            } else if (config.scheme == Scheme::fcfs) {
                key[i] = a.cohort;
            } else {
                const int tier = a.s < tables.desired_grid(a.sd) ? 0 : 1;
                key[i] = tier * n_td + a.td;
            }
            ++count[static_cast<std::size_t>(key[i])];
        }

        // Fill the slots in priority order, random among the marginal key.
        const int slots = static_cast<int>(std::llround(params.capacity[tt] * n / params.e_nom));
        int above = 0;
        int cut = n_keys;
        for (int j = 0; j < n_keys; ++j) {
            if (above + count[static_cast<std::size_t>(j)] >= slots && count[static_cast<std::size_t>(j)] > 0) {
                cut = j;
                break;
            }
            above += count[static_cast<std::size_t>(j)];
        }
        int n_admitted = 0;
        marginal.clear();
        for (std::size_t i = 0; i < agents.size(); ++i) {
            if (key[i] < 0) continue;
            if (key[i] < cut) {
                admitted[i] = 1;
                ++n_admitted;
            } else if (key[i] == cut) {
                marginal.push_back(i);
            }
        }
        const int room = std::max(0, slots - above);
        for (int j = 0; j < room && j < static_cast<int>(marginal.size()); ++j) {
            const std::size_t pick =
                static_cast<std::size_t>(j) +
                static_cast<std::size_t>(uniform01(rng) * static_cast<double>(marginal.size() - static_cast<std::size_t>(j)));
            std::swap(marginal[static_cast<std::size_t>(j)], marginal[std::min(pick, marginal.size() - 1)]);
            admitted[marginal[static_cast<std::size_t>(j)]] = 1;
            ++n_admitted;
        }
        const int b_star = karma ? (cut < n_keys ? k_max - cut : 0) : -1;
        out.max_admitted_over_slots = std::max(out.max_admitted_over_slots, n_admitted - slots);
        if (record) {
            if (karma) ++b_star_hist[tt][static_cast<std::size_t>(b_star)];
            if (config.trace)
                out.trace.push_back({day - config.burn_in_days, t, present / n, slots, b_star, n_admitted, mean_k});
        }

        // Payments and redistribution.
        Redistribution flow;
        if (karma) {
            std::fill(k_hist.begin(), k_hist.end(), 0.0);
            double mean_pre = 0.0;
            for (std::size_t i = 0; i < agents.size(); ++i) {
                k_pre[i] = agents[i].k - (admitted[i] ? bid[i] : 0);
                k_hist[static_cast<std::size_t>(k_pre[i])] += 1.0 / n;
                mean_pre += k_pre[i] / n;
            }
            // Above k_bar there is nothing to hand back; payments bring
            // the mean down again.
            flow = redistribute(k_hist, std::max(params.k_bar, mean_pre), k_max);
        }

        // Exogenous moves.
        const double hazard = tables.hazard(t);
        const int next_t = next_interval(params, t);
        const auto fresh = tables.fresh_demand();
        for (std::size_t i = 0; i < agents.size(); ++i) {
            Agent& a = agents[i];
            if (karma) {
                const KarmaFlow& kf = flow.flows[static_cast<std::size_t>(k_pre[i])];
                a.k = k_pre[i] + static_cast<int>(std::floor(kf.xi)) + (kf.f_k > 0.0 && uniform01(rng) < kf.f_k);
            }
            int s_next = a.ell == kPresent && admitted[i] ? std::min(a.s + 1, n_s - 1) : a.s;
            if (day_end) {
                const auto socs = tables.carryover(a.sd, s_next);
                if (socs.size() == 1) {
                    s_next = socs[0].value;
                } else {
                    const int j = sample_index(rng, [&](int q) { return socs[static_cast<std::size_t>(q)].prob; },
                                               static_cast<int>(socs.size()));
                    s_next = socs[static_cast<std::size_t>(j)].value;
                }
            }
            const auto pl =
                detail::presence_probs(day_end, hazard, a.ell, a.td, s_next >= tables.desired_grid(a.sd));
            int ell_next = 0;
            if (pl[0] == 1.0) ell_next = 0;
            else if (pl[1] == 1.0) ell_next = 1;
            else if (pl[2] == 1.0) ell_next = 2;
            else ell_next = sample_index(rng, [&](int q) { return pl[static_cast<std::size_t>(q)]; }, 3);

            if (day_end) {
                const int j = sample_index(rng, [&](int q) { return fresh[static_cast<std::size_t>(q)].prob; },
                                           static_cast<int>(fresh.size()));
                a.td = fresh[static_cast<std::size_t>(j)].td;
                a.sd = fresh[static_cast<std::size_t>(j)].sd;
                a.u = fresh[static_cast<std::size_t>(j)].u;
            } else if (a.ell != kAbsent) {
                a.td = std::max(a.td - 1, 0);
            }
            a.cohort = ell_next == kPresent ? (a.ell == kPresent && !day_end ? a.cohort : next_t) : 0;
            a.ell = ell_next;
            a.s = s_next;
        }
    };

    // The agents start at the day end; its transition opens the first day.
    const int total_days = config.burn_in_days + config.n_days;
    {
        auto rng = stream(static_cast<std::uint32_t>(total_days));
        advance(nt - 1, rng, false, 0);
    }
    for (int day = 0; day < total_days; ++day) {
        auto rng = stream(static_cast<std::uint32_t>(day));
        const bool record = day >= config.burn_in_days;
        wait = 0.0;
        payoff = 0.0;
        for (int t = 0; t < nt; ++t) advance(t, rng, record, day);
        if (record) {
            day_wait.push_back(wait / n);
            day_payoff.push_back(payoff / n);
        }
    }

    const double observed = n * config.n_days;
    out.frequency.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) out.frequency[i] = counts[i] / observed;

    std::vector<int> b_mode;
    if (karma)
        for (const auto& h : b_star_hist)
            b_mode.push_back(static_cast<int>(std::max_element(h.begin(), h.end()) - h.begin()));
    out.metrics = compute_metrics(space, karma ? block_distribution(space, out.frequency) : out.frequency,
                                  std::move(b_mode));
    out.mean_karma = karma_obs > 0 ? karma_sum / static_cast<double>(karma_obs) : 0.0;

    auto batch_se = [&](const std::vector<double>& xs) {
        const int b = std::max(2, std::min(config.batches, static_cast<int>(xs.size())));
        const std::size_t len = xs.size() / static_cast<std::size_t>(b);
        if (len == 0) return 0.0;
        std::vector<double> means;
        for (int j = 0; j < b; ++j) {
            double s = 0.0;
            for (std::size_t q = 0; q < len; ++q) s += xs[static_cast<std::size_t>(j) * len + q];
            means.push_back(s / static_cast<double>(len));
        }
        double mu = 0.0;
        for (double m : means) mu += m;
        mu /= b;
        double var = 0.0;
        for (double m : means) var += (m - mu) * (m - mu);
        var /= b - 1;
        return std::sqrt(var / b);
    };
    out.se_wait = batch_se(day_wait);
    out.se_payoff = batch_se(day_payoff);
    return out;
}

}  // namespace karma_ev
