// karma-ev: batch front end for the solver, the benchmark chains and the
// Monte Carlo simulation.
//
// Exit codes: 0 ok, 2 invalid config or usage, 3 solver stopped at its
// iteration cap (results still written), 4 I/O failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <omp.h>

#include <CLI11.hpp>

#include "karma_ev/benchmarks.hpp"
#include "karma_ev/checkpoint.hpp"
#include "karma_ev/config.hpp"
#include "karma_ev/csv.hpp"
#include "karma_ev/equilibrium.hpp"
#include "karma_ev/metrics.hpp"
#include "karma_ev/simulation.hpp"

namespace fs = std::filesystem;
using namespace karma_ev;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNotConverged = 3;
constexpr int kExitIo = 4;

struct Common {
    std::string preset;
    std::string config;
    std::string out_dir;
    int threads = 0;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--preset", c.preset, "Bundled setting: moderate, high or desk");
    cmd->add_option("--config", c.config, "JSON run config");
    cmd->add_option("--out-dir", c.out_dir, "Output directory (else $KARMA_EV_OUT_DIR, else the config's)");
    cmd->add_option("--threads", c.threads, "Worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", c.seed, "Seed");
}

RunConfig resolve(const Common& c)
{
    if (!c.preset.empty() && !c.config.empty()) throw ConfigError("give either --preset or --config, not both");
    RunConfig cfg = !c.config.empty() ? load_config(c.config) : preset_config(c.preset.empty() ? "moderate" : c.preset);
    if (const char* env = std::getenv("KARMA_EV_OUT_DIR"); env && *env) cfg.out_dir = env;
    if (!c.out_dir.empty()) cfg.out_dir = c.out_dir;
    if (c.seed) {
        cfg.solver.seed = *c.seed;
        cfg.sim.seed = *c.seed;
    }
    if (c.threads > 0) omp_set_num_threads(c.threads);
    return cfg;
}

std::string prepare_dir(const RunConfig& cfg)
{
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.out_dir + ": " + ec.message());
    return cfg.out_dir;
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::vector<double> embed_blocks(const StateSpace& space, std::span<const double> blocks_last)
{
    // Karma is irrelevant to the priority schemes; park everyone at k_bar.
    const auto nk = static_cast<std::size_t>(space.params().n_karma());
    const auto k = static_cast<std::size_t>(std::lround(space.params().k_bar));
    std::vector<double> out(space.individual_count(), 0.0);
    for (std::size_t z = 0; z < blocks_last.size(); ++z) out[z * nk + k] = blocks_last[z];
    return out;
}

int run_solve(const Common& common, std::optional<int> iters, std::optional<double> tol, const std::string& resume,
              std::string checkpoint)
{
    RunConfig cfg = resolve(common);
    if (iters) cfg.solver.max_iters = *iters;
    if (tol) cfg.solver.tol = *tol;
    if (cfg.solver.max_iters < 0) throw ConfigError("--iters must be >= 0");
    const std::string dir = prepare_dir(cfg);
    if (checkpoint.empty()) checkpoint = path_in(dir, "checkpoint.bin");

    const StateSpace space(cfg.model);
    std::optional<SolverState> start;
    if (!resume.empty()) start = load_checkpoint(resume, space);

    SolverOptions opts = cfg.solver;
    opts.on_iteration = [](const IterationInfo& info) {
        if (info.iteration % 50 == 0)
            std::cerr << "iteration " << info.iteration << " exploitability " << info.exploitability << '\n';
    };
    const SolveResult result = solve_sne(space, opts, start ? &*start : nullptr);

    save_checkpoint(checkpoint, space, result.last);
    if (result.report.terminated_by == Termination::max_iters) {
        SolverState best{result.report.best_iteration, result.social, result.values.V};
        save_checkpoint(path_in(dir, "checkpoint_best.bin"), space, best);
    }

    const Provenance prov{config_hash(cfg), cfg.solver.seed};
    const MetricsBundle m = compute_metrics(space, result.social, cfg.solver.rule);
    CsvWriter metrics(path_in(dir, "karma_metrics.csv"), prov, kMetricsHeader);
    write_metrics(metrics, "karma", cfg.setting, m, cfg.model);
    metrics.close();
    CsvWriter series(path_in(dir, "karma_series.csv"), prov, kSeriesHeader);
    write_series(series, "karma", cfg.setting, m, cfg.model);
    series.close();
    CsvWriter diag(path_in(dir, "diagnostics.csv"), prov, kDiagnosticsHeader);
    const int first = result.report.iterations + 1 - static_cast<int>(result.report.exploitability.size());
    for (std::size_t i = 0; i < result.report.exploitability.size(); ++i) {
        diag << first + static_cast<int>(i) << result.report.exploitability[i] << result.report.distribution_residual[i];
        diag.end_row();
    }
    diag.close();

    const bool converged = result.report.terminated_by == Termination::tolerance;
    std::cout << "iterations=" << result.report.iterations
              << " exploitability=" << format_double(result.report.exploitability.back())
              << " converged=" << (converged ? "true" : "false") << " seed=" << cfg.solver.seed << '\n';
    return converged ? 0 : kExitNotConverged;
}

std::vector<Scheme> benchmark_schemes(const RunConfig& cfg, const std::vector<std::string>& names, bool given)
{
    std::vector<Scheme> out;
    if (given) {
        for (const auto& n : names) {
            std::stringstream ss(n);
            std::string part;
            while (std::getline(ss, part, ','))
                if (!part.empty()) out.push_back(parse_scheme(part));
        }
    } else {
        out = cfg.schemes;
    }
    if (out.empty()) throw ConfigError("no scheme selected");
    for (Scheme s : out)
        if (s == Scheme::karma) throw ConfigError("the benchmark subcommand runs fcfs and edf only");
    return out;
}

void write_benchmarks(const StateSpace& space, const RunConfig& cfg, const std::vector<Scheme>& schemes,
                      CsvWriter& metrics, CsvWriter& series)
{
    for (Scheme s : schemes) {
        const BenchmarkChain chain(space, s);
        const BenchmarkResult r = benchmark_stationary(chain, {cfg.solver.dist_tol, cfg.solver.max_cycles, cfg.solver.rule});
        if (!r.converged) std::cerr << scheme_name(s) << ": stationary distribution did not converge\n";
        const MetricsBundle m = compute_metrics(space, chain.block_distribution(r.d));
        write_metrics(metrics, scheme_name(s), cfg.setting, m, cfg.model);
        write_series(series, scheme_name(s), cfg.setting, m, cfg.model);
    }
}

int run_benchmark(const Common& common, const std::vector<std::string>& names, bool given)
{
    const RunConfig cfg = resolve(common);
    const std::vector<Scheme> schemes = benchmark_schemes(cfg, names, given);
    const std::string dir = prepare_dir(cfg);
    const StateSpace space(cfg.model);
    const Provenance prov{config_hash(cfg), cfg.solver.seed};
    CsvWriter metrics(path_in(dir, "benchmark_metrics.csv"), prov, kMetricsHeader);
    CsvWriter series(path_in(dir, "benchmark_series.csv"), prov, kSeriesHeader);
    write_benchmarks(space, cfg, schemes, metrics, series);
    metrics.close();
    series.close();
    return 0;
}

int run_metrics(const Common& common, const std::string& checkpoint)
{
    const RunConfig cfg = resolve(common);
    const std::string dir = prepare_dir(cfg);
    const StateSpace space(cfg.model);
    const Provenance prov{config_hash(cfg), cfg.solver.seed};
    CsvWriter metrics(path_in(dir, "metrics.csv"), prov, kMetricsHeader);
    CsvWriter series(path_in(dir, "series.csv"), prov, kSeriesHeader);
    if (!checkpoint.empty()) {
        const SolverState state = load_checkpoint(checkpoint, space);
        const MetricsBundle m = compute_metrics(space, state.social, cfg.solver.rule);
        write_metrics(metrics, "karma", cfg.setting, m, cfg.model);
        write_series(series, "karma", cfg.setting, m, cfg.model);
    }
    write_benchmarks(space, cfg, {Scheme::fcfs, Scheme::edf}, metrics, series);
    metrics.close();
    series.close();
    return 0;
}

int run_simulate(const Common& common, const std::string& scheme_arg, std::optional<int> agents,
                 std::optional<int> days, std::optional<int> burn_in, const std::string& checkpoint)
{
    RunConfig cfg = resolve(common);
    if (agents) cfg.sim.agents = *agents;
    if (days) cfg.sim.days = *days;
    if (burn_in) cfg.sim.burn_in = *burn_in;
    if (cfg.sim.agents < 1 || cfg.sim.days < 1 || cfg.sim.burn_in < 0)
        throw ConfigError("--agents and --days must be positive, --burn-in non-negative");
    const Scheme scheme = parse_scheme(scheme_arg);
    if (scheme == Scheme::karma && checkpoint.empty()) throw ConfigError("--checkpoint is required for the karma scheme");
    const std::string dir = prepare_dir(cfg);
    const StateSpace space(cfg.model);
    const std::size_t n = space.individual_count();
    const std::size_t last = static_cast<std::size_t>(space.n_intervals() - 1);

    SimConfig sim;
    sim.n_agents = cfg.sim.agents;
    sim.n_days = cfg.sim.days;
    sim.burn_in_days = cfg.sim.burn_in;
    sim.seed = cfg.sim.seed;
    sim.scheme = scheme;

    SimResult result;
    if (scheme == Scheme::karma) {
        const SolverState state = load_checkpoint(checkpoint, space);
        result = run_simulation(space, sim, state.social.pi, std::span(state.social.d).subspan(last * n, n));
    } else {
        const BenchmarkChain chain(space, scheme);
        const BenchmarkResult r = benchmark_stationary(chain, {cfg.solver.dist_tol, cfg.solver.max_cycles, cfg.solver.rule});
        const std::vector<double> blocks = chain.block_distribution(r.d);
        const std::vector<double> initial =
            embed_blocks(space, std::span(blocks).subspan(last * chain.blocks(), chain.blocks()));
        result = run_simulation(space, sim, {}, initial);
    }

    const Provenance prov{config_hash(cfg), cfg.sim.seed};
    const std::string tag = std::string("sim_") + scheme_name(scheme);
    CsvWriter trace(path_in(dir, tag + "_trace.csv"), prov, kTraceHeader);
    for (const TraceRow& row : result.trace) {
        trace << row.day << cfg.model.clock(row.t) << row.occupancy << row.slots << row.b_star << row.admitted
              << row.mean_karma;
        trace.end_row();
    }
    trace.close();
    CsvWriter summary(path_in(dir, tag + "_summary.csv"), prov, kMetricsHeader);
    write_metrics(summary, scheme_name(scheme), cfg.setting, result.metrics, cfg.model);
    auto extra = [&](const char* measure, double v) {
        summary << scheme_name(scheme) << cfg.setting << measure << "" << v;
        summary.end_row();
    };
    extra("se_avg_wait", result.se_wait);
    extra("se_avg_payoff", result.se_payoff);
    if (scheme == Scheme::karma) {
        extra("mean_karma", result.mean_karma);
        extra("max_karma_deviation", result.max_karma_deviation);
    }
    summary.close();
    std::cout << "seed=" << cfg.sim.seed << " avg_wait=" << format_double(result.metrics.avg_wait)
              << " avg_payoff=" << format_double(result.metrics.avg_payoff) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Karma-based EV charging: equilibrium solver, benchmarks and simulation"};
    app.require_subcommand(1);

    Common solve_c, bench_c, sim_c, metrics_c;

    auto* solve = app.add_subcommand("solve", "Compute a stationary Nash equilibrium");
    add_common(solve, solve_c);
    std::optional<int> iters;
    std::optional<double> tol;
    std::string resume, solve_ckpt;
    solve->add_option("--iters", iters, "Iteration cap");
    solve->add_option("--tol", tol, "Exploitability tolerance");
    solve->add_option("--resume", resume, "Checkpoint to continue from");
    solve->add_option("--checkpoint", solve_ckpt, "Where to write the checkpoint (default OUT/checkpoint.bin)");

    auto* bench = app.add_subcommand("benchmark", "Stationary measures of the FCFS and EDF schedulers");
    add_common(bench, bench_c);
    std::vector<std::string> bench_schemes;
    auto* bench_scheme_opt = bench->add_option("--scheme", bench_schemes, "fcfs, edf (repeat or comma-separate)");

    auto* sim = app.add_subcommand("simulate", "Finite-population Monte Carlo run");
    add_common(sim, sim_c);
    std::string sim_scheme = "karma", sim_ckpt;
    std::optional<int> agents, days, burn_in;
    sim->add_option("--scheme", sim_scheme, "karma, fcfs or edf");
    sim->add_option("--agents", agents, "Population size");
    sim->add_option("--days", days, "Recorded days");
    sim->add_option("--burn-in", burn_in, "Days simulated before recording");
    sim->add_option("--checkpoint", sim_ckpt, "Solved checkpoint holding the karma policy");

    auto* metrics = app.add_subcommand("metrics", "Measures of a solved checkpoint next to both benchmarks");
    add_common(metrics, metrics_c);
    std::string metrics_ckpt;
    metrics->add_option("--checkpoint", metrics_ckpt, "Solved checkpoint");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*solve) return run_solve(solve_c, iters, tol, resume, solve_ckpt);
        if (*bench) return run_benchmark(bench_c, bench_schemes, bench_scheme_opt->count() > 0);
        if (*sim) return run_simulate(sim_c, sim_scheme, agents, days, burn_in, sim_ckpt);
        if (*metrics) return run_metrics(metrics_c, metrics_ckpt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ModelError& e) {
        std::cerr << "model error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    }
    return kExitUsage;
}
