#include "karma_ev/benchmarks.hpp"

#include <algorithm>
#include <limits>

#include "anderson.hpp"

namespace karma_ev {

const char* scheme_name(Scheme s)
{
    switch (s) {
    case Scheme::karma: return "karma";
    case Scheme::fcfs: return "fcfs";
    case Scheme::edf: return "edf";
    }
    return "?";
}

PriorityAllocation priority_fill(std::span<const double> class_mass, double capacity, double e_nom)
{
    PriorityAllocation out;
    out.mass.assign(class_mass.begin(), class_mass.end());
    out.admit.assign(class_mass.size(), 0.0);
    const double slack = 1e-12;
    double above = 0.0;
    for (std::size_t j = 0; j < class_mass.size(); ++j) {
        const double m = class_mass[j];
        if ((above + m) * e_nom <= capacity + slack) {
            out.admit[j] = 1.0;
        } else if (above * e_nom < capacity) {
            out.admit[j] = (capacity - above * e_nom) / (m * e_nom);
            out.marginal = static_cast<int>(j);
        }
        above += m;
    }
    return out;
}

BenchmarkChain::BenchmarkChain(const StateSpace& space, Scheme scheme)
    : space_(space), scheme_(scheme), tables_(space), graph_(space, tables_)
{
    if (scheme == Scheme::karma) throw ModelError("the karma scheme has no priority chain");
    const ModelParams& params = space.params();
    cohorts_ = scheme == Scheme::fcfs ? space.n_intervals() : 1;
    const auto nk = static_cast<std::size_t>(params.n_karma());
    const int n_td = params.n_deadlines();
    ell_.resize(blocks());
    class_.resize(blocks());
    for (std::size_t z = 0; z < blocks(); ++z) {
        const IndividualState x = space.individual(z * nk);
        ell_[z] = x.ell;
        class_[z] = -1;
        if (!space.can_bid(x.ell, x.s)) continue;
        if (scheme == Scheme::fcfs) {
            class_[z] = 0;
        } else {
            const int tier = x.s < params.desired_soc_grid_index(x.sd) ? 0 : 1;
            class_[z] = tier * n_td + x.td;
        }
    }
}

int BenchmarkChain::n_classes() const
{
    return scheme_ == Scheme::fcfs ? cohorts_ : 2 * space_.params().n_deadlines();
}

int BenchmarkChain::priority_class(std::size_t state) const
{
    const std::size_t z = state / static_cast<std::size_t>(cohorts_);
    const int c = class_[z];
    if (c < 0) return -1;
    return scheme_ == Scheme::fcfs ? static_cast<int>(state % static_cast<std::size_t>(cohorts_)) : c;
}

PriorityAllocation BenchmarkChain::allocate(int t, std::span<const double> d_t) const
{
    std::vector<double> mass(static_cast<std::size_t>(n_classes()), 0.0);
    for (std::size_t i = 0; i < states_per_interval(); ++i) {
        const int c = priority_class(i);
        if (c >= 0) mass[static_cast<std::size_t>(c)] += d_t[i];
    }
    const ModelParams& params = space_.params();
    return priority_fill(mass, params.capacity[static_cast<std::size_t>(t)], params.e_nom);
}

std::vector<Weighted<std::size_t>> BenchmarkChain::successors(int t, std::size_t state, double admit) const
{
    const std::size_t z = state / static_cast<std::size_t>(cohorts_);
    const int cohort = static_cast<int>(state % static_cast<std::size_t>(cohorts_));
    const bool day_end = t == space_.n_intervals() - 1;
    const int arrival = next_interval(space_.params(), t);
    std::vector<Weighted<std::size_t>> out;
    for (int charged = 0; charged < 2; ++charged) {
        const double pe = charged ? admit : 1.0 - admit;
        if (pe <= 0.0) continue;
        for (const auto& e : graph_.out(t, 2 * z + static_cast<std::size_t>(charged))) {
            int next_cohort = 0;
            if (cohorts_ > 1 && ell_[e.node] == kPresent)
                next_cohort = ell_[z] == kPresent && !day_end ? cohort : arrival;
            out.push_back({index(e.node, next_cohort), pe * e.w});
        }
    }
    return out;
}

void BenchmarkChain::propagate(int t, std::span<const double> d_t, std::span<double> d_next) const
{
    const PriorityAllocation alloc = allocate(t, d_t);
    std::fill(d_next.begin(), d_next.end(), 0.0);
    for (std::size_t i = 0; i < states_per_interval(); ++i) {
        if (d_t[i] == 0.0) continue;
        const int c = priority_class(i);
        const double admit = c < 0 ? 0.0 : alloc.admit[static_cast<std::size_t>(c)];
        for (const auto& [j, p] : successors(t, i, admit)) d_next[j] += d_t[i] * p;
    }
}

std::vector<double> BenchmarkChain::seed() const
{
    const ModelParams& params = space_.params();
    const auto nk = static_cast<std::size_t>(params.n_karma());
    const std::size_t n = states_per_interval();
    std::vector<double> d(n * static_cast<std::size_t>(space_.n_intervals()), 0.0);
    const std::size_t last = n * static_cast<std::size_t>(space_.n_intervals() - 1);
    for (int td = 0; td < params.n_deadlines(); ++td)
        for (int sd = 0; sd < params.n_desired(); ++sd)
            for (int u = 0; u < params.n_urgency(); ++u) {
                const std::size_t z = space_.individual_index({kAbsent, td, sd, u, 0, 0}) / nk;
                d[last + index(z, 0)] += params.demand_prob(td, sd, u);
            }
    return d;
}

std::vector<double> BenchmarkChain::block_distribution(std::span<const double> d) const
{
    const std::size_t n = states_per_interval();
    const auto nt = static_cast<std::size_t>(space_.n_intervals());
    std::vector<double> out(nt * blocks(), 0.0);
    for (std::size_t t = 0; t < nt; ++t)
        for (std::size_t i = 0; i < n; ++i)
            out[t * blocks() + i / static_cast<std::size_t>(cohorts_)] += d[t * n + i];
    return out;
}

BenchmarkResult benchmark_stationary(const BenchmarkChain& chain, const StationaryOptions& opts)
{
    const std::size_t n = chain.states_per_interval();
    const int nt = chain.space().n_intervals();
    const auto last = static_cast<std::size_t>(nt - 1);
    BenchmarkResult out;
    out.d = chain.seed();
    const std::span<double> d(out.d);
    auto block = [&](std::span<double> v, std::size_t t) { return v.subspan(t * n, n); };
    auto step = [&](int t) {
        const auto tt = static_cast<std::size_t>(t);
        chain.propagate(t, block(d, tt), block(d, static_cast<std::size_t>(next_interval(chain.space().params(), t))));
    };

    std::vector<double> prev = out.d;
    std::vector<double> x(d.begin() + static_cast<std::ptrdiff_t>(last * n), d.end());
    detail::Anderson mixer(n, 8);
    double best_fp = std::numeric_limits<double>::infinity();
    for (int cycle = 1; cycle <= opts.max_cycles; ++cycle) {
        std::copy(x.begin(), x.end(), block(d, last).begin());
        step(nt - 1);
        for (int t = 0; t + 1 < nt; ++t) step(t);
        const std::span<const double> g = block(d, last);
        const double fp = kernels::total_variation(g, x);
        double residual = fp;
        for (std::size_t t = 0; t <= last; ++t)
            residual = std::max(residual, kernels::total_variation(block(d, t), block(std::span<double>(prev), t)));
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
    for (int t = 0; t < nt; ++t) out.allocation.push_back(chain.allocate(t, block(d, static_cast<std::size_t>(t))));
    return out;
}

}  // namespace karma_ev
