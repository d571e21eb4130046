#include "karma_ev/metrics.hpp"

namespace karma_ev {

double MetricsBundle::wait_by_urgency(int u) const
{
    if (u < 0 || u >= static_cast<int>(urgency_prob.size())) throw ModelError("urgency index out of range");
    const double p = urgency_prob[static_cast<std::size_t>(u)];
    if (p <= 0.0) throw ModelError("urgency level has zero probability; its conditional wait is undefined");
    return wait_mass[static_cast<std::size_t>(u)] / p;
}

std::vector<double> block_distribution(const StateSpace& space, std::span<const double> d)
{
    const auto nk = static_cast<std::size_t>(space.params().n_karma());
    const std::size_t n = space.individual_count();
    const std::size_t blocks = n / nk;
    const auto nt = static_cast<std::size_t>(space.n_intervals());
    std::vector<double> out(nt * blocks, 0.0);
    for (std::size_t t = 0; t < nt; ++t)
        for (std::size_t z = 0; z < blocks; ++z) {
            double sum = 0.0;
            for (std::size_t k = 0; k < nk; ++k) sum += d[t * n + z * nk + k];
            out[t * blocks + z] = sum;
        }
    return out;
}

MetricsBundle compute_metrics(const StateSpace& space, std::span<const double> blocks, std::vector<int> b_star)
{
    const ModelParams& params = space.params();
    const auto nk = static_cast<std::size_t>(params.n_karma());
    const std::size_t n_blocks = space.individual_count() / nk;
    const int nt = space.n_intervals();

    MetricsBundle m;
    m.urgency_prob = params.urgency_marginal();
    m.wait_mass.assign(m.urgency_prob.size(), 0.0);
    m.occupancy.assign(static_cast<std::size_t>(nt), 0.0);
    m.b_star = std::move(b_star);
    for (int t = 0; t < nt; ++t) {
        const auto tt = static_cast<std::size_t>(t);
        m.admission_fraction.push_back(params.capacity[tt] / params.e_nom);
        for (std::size_t z = 0; z < n_blocks; ++z) {
            const double p = blocks[tt * n_blocks + z];
            if (p == 0.0) continue;
            const IndividualState x = space.individual(z * nk);
            m.avg_payoff += p * space.payoff(t, z * nk);
            if (x.ell != kPresent) continue;
            m.occupancy[tt] += p;
            if (x.td == 0) {
                m.avg_wait += p;
                m.wait_mass[static_cast<std::size_t>(x.u)] += p;
            }
        }
    }
    m.avg_wait_per_interval = m.avg_wait / nt;
    return m;
}

MetricsBundle compute_metrics(const StateSpace& space, const SocialState& social, AuctionRule rule)
{
    std::vector<int> b_star;
    for (const IntervalSnapshot& snap : make_snapshots(space, social, rule)) b_star.push_back(snap.auction.b_star);
    return compute_metrics(space, block_distribution(space, social.d), std::move(b_star));
}

}  // namespace karma_ev
