#include "karma_ev/equilibrium.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "karma_ev/kernels.hpp"
#include "anderson.hpp"

namespace karma_ev {

namespace {

std::span<const double> block(std::span<const double> v, std::size_t t, std::size_t n) { return v.subspan(t * n, n); }
std::span<double> block(std::span<double> v, std::size_t t, std::size_t n) { return v.subspan(t * n, n); }

}  // namespace

std::vector<double> seed_distribution(const StateSpace& space)
{
    const ModelParams& params = space.params();
    std::vector<double> d(space.size(), 0.0);
    const int last = space.n_intervals() - 1;
    const int k_lo = static_cast<int>(std::floor(params.k_bar));
    const double frac = params.k_bar - k_lo;
    for (int td = 0; td < params.n_deadlines(); ++td)
        for (int sd = 0; sd < params.n_desired(); ++sd)
            for (int u = 0; u < params.n_urgency(); ++u) {
                const double p = params.demand_prob(td, sd, u);
                if (p == 0.0) continue;
                d[space.index({last, kAbsent, td, sd, u, 0, k_lo})] += p * (1.0 - frac);
                if (frac > 0.0) d[space.index({last, kAbsent, td, sd, u, 0, k_lo + 1})] += p * frac;
            }
    return d;
}

StationaryResult stationary_distribution(const StateSpace& space, std::span<const double> pi,
                                         const StationaryOptions& opts, std::span<const double> warm)
{
    const std::size_t n = space.individual_count();
    const std::size_t n_act = space.actions_per_interval();
    const int nt = space.n_intervals();
    const auto last = static_cast<std::size_t>(nt - 1);
    const TransitionTables tables(space);
    const kernels::BlockGraph graph(space, tables);
    kernels::Workspace work;

    StationaryResult out;
    out.d = warm.empty() ? seed_distribution(space) : std::vector<double>(warm.begin(), warm.end());
    const std::span<double> d(out.d);
    auto step = [&](int t) {
        const auto tt = static_cast<std::size_t>(t);
        const IntervalSnapshot snap = make_snapshot(space, t, block(std::span<const double>(d), tt, n),
                                                    pi.subspan(tt * n_act, n_act), opts.rule);
        const auto next = static_cast<std::size_t>(next_interval(space.params(), t));
        kernels::propagate_parallel(space, graph, snap, block(std::span<const double>(d), tt, n),
                                    pi.subspan(tt * n_act, n_act), block(d, next, n), work);
    };

    // The day-end block is the fixed-point variable of one day cycle.
    std::vector<double> prev = out.d;
    std::vector<double> x(d.begin() + static_cast<std::ptrdiff_t>(last * n), d.end());
    detail::Anderson mixer(n, 8);
    double best_fp = std::numeric_limits<double>::infinity();
    for (int cycle = 1; cycle <= opts.max_cycles; ++cycle) {
        std::copy(x.begin(), x.end(), block(d, last, n).begin());
        step(nt - 1);
        for (int t = 0; t + 1 < nt; ++t) step(t);
        const std::span<const double> g = block(std::span<const double>(d), last, n);
        const double fp = kernels::total_variation(g, x);
        double residual = fp;
        for (std::size_t t = 0; t < static_cast<std::size_t>(nt); ++t)
            residual = std::max(residual, kernels::total_variation(block(std::span<const double>(d), t, n),
                                                                    block(std::span<const double>(prev), t, n)));
        out.residual = residual;
        out.cycles = cycle;
        if (residual < opts.tol) {
            out.converged = true;
            break;
        }
        if (fp > 10.0 * best_fp) mixer.reset();
        best_fp = std::min(best_fp, fp);
        prev = out.d;

        if (!detail::mix_distribution(mixer, x, g)) mixer.reset();
    }
    return out;
}

ValueTables evaluate_values(const StateSpace& space, const SocialState& social, const ValueOptions& opts,
                            std::span<const double> warm_v)
{
    const auto snaps = make_snapshots(space, social, opts.rule);
    return evaluate_values(space, snaps, social.pi, opts, warm_v);
}

ValueTables evaluate_values(const StateSpace& space, std::span<const IntervalSnapshot> snaps,
                            std::span<const double> pi, const ValueOptions& opts, std::span<const double> warm_v)
{
    const ModelParams& params = space.params();
    const double delta = params.delta_end;
    if (!(delta >= 0.0 && delta < 1.0)) throw ModelError("value recursion does not contract: delta_end must be < 1");

    const std::size_t n = space.individual_count();
    const std::size_t n_act = space.actions_per_interval();
    const int nt = space.n_intervals();
    const auto last = static_cast<std::size_t>(nt - 1);
    const TransitionTables tables(space);
    const kernels::BlockGraph graph(space, tables);
    kernels::Workspace work;

    ValueTables out;
    out.V.assign(space.size(), 0.0);
    out.Q.assign(space.action_count(), 0.0);
    std::vector<double> start(n, 0.0);
    if (!warm_v.empty()) std::copy_n(warm_v.begin(), n, start.begin());

    const std::span<double> V(out.V);
    const std::span<double> Q(out.Q);
    auto sweep = [&](std::span<const double> v_start) {
        kernels::backup_parallel(space, graph, snaps[last], delta, v_start, pi.subspan(last * n_act, n_act),
                                 block(V, last, n), block(Q, last, n_act), work);
        for (std::size_t t = last; t-- > 0;)
            kernels::backup_parallel(space, graph, snaps[t], 1.0, block(std::span<const double>(V), t + 1, n),
                                     pi.subspan(t * n_act, n_act), block(V, t, n), block(Q, t, n_act), work);
    };

    // Within a sweep every interval but the last is exact, and the last is
    // off by at most delta * max|V[0] - start|.
    detail::Anderson mixer(n, 8);
    for (int s = 1; s <= opts.max_sweeps; ++s) {
        sweep(start);
        out.day_sweeps = s;
        double gap = 0.0;
        for (std::size_t i = 0; i < n; ++i) gap = std::max(gap, std::abs(V[i] - start[i]));
        if (gap <= 0.5 * opts.tol) {
            out.converged = true;
            break;
        }
        mixer.step(start, block(std::span<const double>(V), 0, n));
    }
    out.bellman_residual = bellman_residual(space, snaps, pi, out.V);
    return out;
}

double bellman_residual(const StateSpace& space, std::span<const IntervalSnapshot> snaps,
                        std::span<const double> pi, std::span<const double> V)
{
    const std::size_t n = space.individual_count();
    const std::size_t n_act = space.actions_per_interval();
    const int nt = space.n_intervals();
    const TransitionTables tables(space);
    const kernels::BlockGraph graph(space, tables);
    kernels::Workspace work;
    std::vector<double> v(n), q(n_act);
    double worst = 0.0;
    for (int t = 0; t < nt; ++t) {
        const auto tt = static_cast<std::size_t>(t);
        const auto next = static_cast<std::size_t>(next_interval(space.params(), t));
        const double discount = t == nt - 1 ? space.params().delta_end : 1.0;
        kernels::backup_parallel(space, graph, snaps[tt], discount, block(V, next, n), pi.subspan(tt * n_act, n_act),
                                 v, q, work);
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(v[i] - V[tt * n + i]));
    }
    return worst;
}

std::vector<int> best_response(std::span<const double> q_row, double tol)
{
    const double best = *std::max_element(q_row.begin(), q_row.end());
    std::vector<int> out;
    for (std::size_t b = 0; b < q_row.size(); ++b)
        if (q_row[b] >= best - tol) out.push_back(static_cast<int>(b));
    return out;
}

std::vector<double> policy_update(const StateSpace& space, std::span<const double> pi, std::span<const double> Q,
                                  double eta, double temp)
{
    std::vector<double> out(pi.begin(), pi.end());
    const std::size_t n = space.individual_count();
    const std::size_t n_act = space.actions_per_interval();
    const auto rows = static_cast<std::ptrdiff_t>(n * static_cast<std::size_t>(space.n_intervals()));
#pragma omp parallel for schedule(dynamic, 512)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
        const std::size_t t = static_cast<std::size_t>(r) / n;
        const std::size_t i = static_cast<std::size_t>(r) % n;
        const int m = space.action_count(i);
        if (m < 2) continue;
        const std::size_t off = t * n_act + space.action_offset(i);
        const double* q = Q.data() + off;
        double* p = out.data() + off;
        const double top = *std::max_element(q, q + m);
        double z = 0.0;
        double weights[64];
        std::vector<double> spill;
        double* w = weights;
        if (m > 64) {
            spill.resize(static_cast<std::size_t>(m));
            w = spill.data();
        }
        for (int b = 0; b < m; ++b) {
            w[b] = std::exp((q[b] - top) / temp);
            z += w[b];
        }
        double total = 0.0;
        for (int b = 0; b < m; ++b) {
            p[b] = (1.0 - eta) * p[b] + eta * w[b] / z;
            total += p[b];
        }
        for (int b = 0; b < m; ++b) p[b] /= total;
    }
    return out;
}

double exploitability(const StateSpace& space, std::span<const double> d, std::span<const double> pi,
                      std::span<const double> Q)
{
    const std::size_t n = space.individual_count();
    const std::size_t n_act = space.actions_per_interval();
    const int nt = space.n_intervals();
    double sum = 0.0;
    for (int t = 0; t < nt; ++t) {
        const auto tt = static_cast<std::size_t>(t);
        for (std::size_t i = 0; i < n; ++i) {
            const double m = d[tt * n + i];
            const int na = space.action_count(i);
            if (m == 0.0 || na < 2) continue;
            const std::size_t off = tt * n_act + space.action_offset(i);
            double top = Q[off];
            double avg = 0.0;
            for (int b = 0; b < na; ++b) {
                top = std::max(top, Q[off + static_cast<std::size_t>(b)]);
                avg += pi[off + static_cast<std::size_t>(b)] * Q[off + static_cast<std::size_t>(b)];
            }
            sum += m * std::max(0.0, top - avg);
        }
    }
    return sum / nt;
}

double SolverOptions::temperature(int iteration) const
{
    if (anneal_iters <= 0 || iteration >= anneal_iters) return temp_end;
    return temp_start * std::pow(temp_end / temp_start, static_cast<double>(iteration) / anneal_iters);
}

SolveResult solve_sne(const StateSpace& space, const SolverOptions& opts, const SolverState* resume)
{
    const auto started = std::chrono::steady_clock::now();
    const StationaryOptions dist_opts{opts.dist_tol, opts.max_cycles, opts.rule};
    const ValueOptions value_opts{opts.value_tol, 200000, opts.rule};

    SolveResult best;
    SocialState social;
    std::vector<double> warm_v;
    int iteration = 0;
    if (resume) {
        social = resume->social;
        warm_v = resume->V;
        iteration = resume->iteration;
    } else {
        social.pi = uniform_policy(space);
    }

    ValueTables values;
    double best_expl = std::numeric_limits<double>::infinity();
    auto evaluate = [&]() {
        StationaryResult st = stationary_distribution(space, social.pi, dist_opts, social.d);
        social.d = std::move(st.d);
        const auto snaps = make_snapshots(space, social, opts.rule);
        values = evaluate_values(space, snaps, social.pi, value_opts, warm_v);
        warm_v = values.V;
        const double expl = exploitability(space, social.d, social.pi, values.Q);
        best.report.exploitability.push_back(expl);
        best.report.distribution_residual.push_back(st.residual);
        if (expl < best_expl) {
            best_expl = expl;
            best.social = social;
            best.values = values;
            best.report.best_iteration = iteration;
        }
        if (opts.on_iteration)
            opts.on_iteration({iteration, expl, st.residual, st.cycles, values.day_sweeps, opts.temperature(iteration)});
        return expl;
    };

    double expl = evaluate();
    while (expl >= opts.tol && iteration < opts.max_iters) {
        social.pi = policy_update(space, social.pi, values.Q, opts.eta, opts.temperature(iteration));
        ++iteration;
        expl = evaluate();
    }

    best.report.iterations = iteration;
    best.last = {iteration, social, values.V};
    best.report.terminated_by = expl < opts.tol ? Termination::tolerance : Termination::max_iters;
    if (best.report.terminated_by == Termination::tolerance) {
        best.social = std::move(social);
        best.values = std::move(values);
        best.report.best_iteration = iteration;
    }
    best.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return best;
}

}  // namespace karma_ev
