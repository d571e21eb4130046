#include "karma_ev/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace karma_ev::kernels {

namespace {

inline void push_state(const StateSpace& space, const TransitionTables& tables, const IntervalSnapshot& snap,
                       std::size_t i, double mass, const double* pi, double* out)
{
    const int n = space.action_count(i);
    for (int a = 0; a < n; ++a) {
        const double w = mass * pi[a];
        if (w == 0.0) continue;
        for_each_successor(space, tables, snap, i, a, [&](std::size_t next, double p) { out[next] += w * p; });
    }
}

inline void backup_state(const StateSpace& space, const TransitionTables& tables, const IntervalSnapshot& snap,
                         double discount, std::size_t i, const double* v_next, const double* pi, double* v, double* q)
{
    const double r = space.payoff(snap.t, i);
    const int n = space.action_count(i);
    double value = 0.0;
    for (int a = 0; a < n; ++a) {
        double expect = 0.0;
        for_each_successor(space, tables, snap, i, a, [&](std::size_t next, double p) { expect += p * v_next[next]; });
        q[a] = r + discount * expect;
        value += pi[a] * q[a];
    }
    *v = value;
}

// Karma split shared by every block: k_pre -> k_pre + floor(xi) (+1 w.p. f).
struct KarmaSplit {
    std::vector<int> lo;
    std::vector<double> f;

    explicit KarmaSplit(const IntervalSnapshot& snap)
    {
        const std::size_t n = snap.karma.flows.size();
        lo.resize(n);
        f.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            const KarmaFlow& flow = snap.karma.flows[k];
            lo[k] = static_cast<int>(k) + static_cast<int>(std::floor(flow.xi));
            f[k] = flow.f_k;
        }
    }
};

}  // namespace

BlockGraph::BlockGraph(const StateSpace& space, const TransitionTables& tables)
{
    const ModelParams& params = space.params();
    const int nt = space.n_intervals();
    const auto n_k = static_cast<std::size_t>(params.n_karma());
    n_blocks_ = space.individual_count() / n_k;
    fwd_.resize(static_cast<std::size_t>(nt));
    rev_.resize(static_cast<std::size_t>(nt));
    const int n_s = params.n_soc();

    for (int t = 0; t < nt; ++t) {
        const bool day_end = t == nt - 1;
        const double hazard = tables.hazard(t);
        Csr& fwd = fwd_[static_cast<std::size_t>(t)];
        fwd.offset.assign(2 * n_blocks_ + 1, 0);
        std::vector<std::uint32_t> src_of;
        for (std::size_t z = 0; z < n_blocks_; ++z) {
            const IndividualState x = space.individual(z * n_k);
            const DemandOutcome frozen{x.ell == kAbsent ? x.td : std::max(x.td - 1, 0), x.sd, x.u, 1.0};
            const std::span<const DemandOutcome> demand =
                day_end ? tables.fresh_demand() : std::span<const DemandOutcome>(&frozen, 1);
            const int charged_max = space.can_bid(x.ell, x.s) ? 2 : 1;
            for (int charged = 0; charged < 2; ++charged) {
                const std::size_t src = 2 * z + static_cast<std::size_t>(charged);
                if (charged < charged_max) {
                    const int s_pre = x.ell == kPresent && charged ? std::min(x.s + 1, n_s - 1) : x.s;
                    const Weighted<int> stay{s_pre, 1.0};
                    const std::span<const Weighted<int>> socs =
                        day_end ? tables.carryover(x.sd, s_pre) : std::span<const Weighted<int>>(&stay, 1);
                    for (const auto& [s_next, ps] : socs) {
                        const auto pl =
                            detail::presence_probs(day_end, hazard, x.ell, x.td, s_next >= tables.desired_grid(x.sd));
                        for (int ell_next = 0; ell_next < 3; ++ell_next) {
                            const double p_ell = pl[static_cast<std::size_t>(ell_next)];
                            if (p_ell <= 0.0) continue;
                            for (const DemandOutcome& dm : demand) {
                                const std::size_t dst =
                                    space.individual_index({ell_next, dm.td, dm.sd, dm.u, s_next, 0}) / n_k;
                                fwd.edges.push_back({static_cast<std::uint32_t>(dst), ps * p_ell * dm.prob});
                                src_of.push_back(static_cast<std::uint32_t>(src));
                            }
                        }
                    }
                }
                fwd.offset[src + 1] = fwd.edges.size();
            }
        }

        Csr& rev = rev_[static_cast<std::size_t>(t)];
        rev.offset.assign(n_blocks_ + 1, 0);
        for (const Edge& e : fwd.edges) ++rev.offset[e.node + 1];
        for (std::size_t z = 0; z < n_blocks_; ++z) rev.offset[z + 1] += rev.offset[z];
        rev.edges.resize(fwd.edges.size());
        std::vector<std::size_t> fill(rev.offset.begin(), rev.offset.end() - 1);
        for (std::size_t j = 0; j < fwd.edges.size(); ++j)
            rev.edges[fill[fwd.edges[j].node]++] = {src_of[j], fwd.edges[j].w};
    }
}

void propagate_serial(const StateSpace& space, const TransitionTables& tables, const IntervalSnapshot& snap,
                      std::span<const double> d_t, std::span<const double> pi_t, std::span<double> d_next)
{
    std::fill(d_next.begin(), d_next.end(), 0.0);
    for (std::size_t i = 0; i < space.individual_count(); ++i) {
        if (d_t[i] == 0.0) continue;
        push_state(space, tables, snap, i, d_t[i], pi_t.data() + space.action_offset(i), d_next.data());
    }
}

void propagate_parallel(const StateSpace& space, const BlockGraph& graph, const IntervalSnapshot& snap,
                        std::span<const double> d_t, std::span<const double> pi_t, std::span<double> d_next,
                        Workspace& work)
{
    const int n_k = space.params().n_karma();
    const auto nk = static_cast<std::size_t>(n_k);
    const std::size_t blocks = graph.blocks();
    const std::vector<double>& admit = snap.admit();
    const KarmaSplit split(snap);
    work.buffer.assign(2 * blocks * nk, 0.0);
    double* mass = work.buffer.data();

    // Post-payment karma mass of every (block, charged).
    const auto n_blocks = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t zz = 0; zz < n_blocks; ++zz) {
        const auto z = static_cast<std::size_t>(zz);
        double* m0 = mass + 2 * z * nk;
        double* m1 = m0 + nk;
        for (int k = 0; k < n_k; ++k) {
            const std::size_t i = z * nk + static_cast<std::size_t>(k);
            const double m = d_t[i];
            if (m == 0.0) continue;
            if (!space.can_bid(i)) {
                m0[k] += m;
                continue;
            }
            const double* p = pi_t.data() + space.action_offset(i);
            for (int b = 0; b <= k; ++b) {
                const double w = m * p[b];
                const double a = admit[static_cast<std::size_t>(b)];
                m1[k - b] += w * a;
                m0[k] += w * (1.0 - a);
            }
        }
    }

    // Pull into each destination block, then spread over karma.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t zz = 0; zz < n_blocks; ++zz) {
        const auto z = static_cast<std::size_t>(zz);
        double acc[64];
        std::vector<double> spill;
        double* a = acc;
        if (nk > 64) {
            spill.resize(nk);
            a = spill.data();
        }
        std::fill(a, a + nk, 0.0);
        for (const auto& e : graph.in(snap.t, z)) {
            const double* src = mass + e.node * nk;
            for (std::size_t kp = 0; kp < nk; ++kp) a[kp] += e.w * src[kp];
        }
        double* out = d_next.data() + z * nk;
        std::fill(out, out + nk, 0.0);
        for (std::size_t kp = 0; kp < nk; ++kp) {
            if (a[kp] == 0.0) continue;
            const double f = split.f[kp];
            out[split.lo[kp]] += a[kp] * (1.0 - f);
            if (f > 0.0) out[split.lo[kp] + 1] += a[kp] * f;
        }
    }
}

void backup_serial(const StateSpace& space, const TransitionTables& tables, const IntervalSnapshot& snap,
                   double discount, std::span<const double> v_next, std::span<const double> pi_t,
                   std::span<double> v_t, std::span<double> q_t)
{
    for (std::size_t i = 0; i < space.individual_count(); ++i) {
        const std::size_t off = space.action_offset(i);
        backup_state(space, tables, snap, discount, i, v_next.data(), pi_t.data() + off, &v_t[i], q_t.data() + off);
    }
}

void backup_parallel(const StateSpace& space, const BlockGraph& graph, const IntervalSnapshot& snap,
                     double discount, std::span<const double> v_next, std::span<const double> pi_t,
                     std::span<double> v_t, std::span<double> q_t, Workspace& work)
{
    const int n_k = space.params().n_karma();
    const auto nk = static_cast<std::size_t>(n_k);
    const std::size_t blocks = graph.blocks();
    const std::vector<double>& admit = snap.admit();
    const KarmaSplit split(snap);
    work.buffer.resize(blocks * nk);
    double* karma_value = work.buffer.data();

    // Expected next value of each destination block given post-payment karma.
    const auto n_blocks = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t zz = 0; zz < n_blocks; ++zz) {
        const auto z = static_cast<std::size_t>(zz);
        const double* v = v_next.data() + z * nk;
        double* w = karma_value + z * nk;
        for (std::size_t kp = 0; kp < nk; ++kp) {
            const double f = split.f[kp];
            const auto lo = static_cast<std::size_t>(split.lo[kp]);
            w[kp] = (1.0 - f) * v[lo] + (f > 0.0 ? f * v[lo + 1] : 0.0);
        }
    }

#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t zz = 0; zz < n_blocks; ++zz) {
        const auto z = static_cast<std::size_t>(zz);
        double stack[128];
        std::vector<double> spill;
        double* c0 = stack;
        if (2 * nk > 128) {
            spill.resize(2 * nk);
            c0 = spill.data();
        }
        double* c1 = c0 + nk;
        const bool eligible = space.can_bid(z * nk);
        for (int charged = 0; charged < (eligible ? 2 : 1); ++charged) {
            double* c = charged ? c1 : c0;
            std::fill(c, c + nk, 0.0);
            for (const auto& e : graph.out(snap.t, 2 * z + static_cast<std::size_t>(charged))) {
                const double* w = karma_value + e.node * nk;
                for (std::size_t kp = 0; kp < nk; ++kp) c[kp] += e.w * w[kp];
            }
        }
        for (int k = 0; k < n_k; ++k) {
            const std::size_t i = z * nk + static_cast<std::size_t>(k);
            const double r = space.payoff(snap.t, i);
            const std::size_t off = space.action_offset(i);
            double* q = q_t.data() + off;
            if (!eligible) {
                q[0] = r + discount * c0[k];
                v_t[i] = q[0];
                continue;
            }
            const double* p = pi_t.data() + off;
            double value = 0.0;
            for (int b = 0; b <= k; ++b) {
                const double a = admit[static_cast<std::size_t>(b)];
                q[b] = r + discount * (a * c1[k - b] + (1.0 - a) * c0[k]);
                value += p[b] * q[b];
            }
            v_t[i] = value;
        }
    }
}

double total_variation(std::span<const double> a, std::span<const double> b)
{
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
    return 0.5 * sum;
}

}  // namespace karma_ev::kernels
