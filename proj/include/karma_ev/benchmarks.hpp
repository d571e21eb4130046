#pragma once

#include <span>
#include <vector>

#include "karma_ev/equilibrium.hpp"
#include "karma_ev/kernels.hpp"

namespace karma_ev {

enum class Scheme { karma, fcfs, edf };

const char* scheme_name(Scheme s);

/// Capacity handed out class by class, highest priority (lowest class id)
/// first. The class that exhausts capacity is admitted fractionally,
/// uniformly within the class.
struct PriorityAllocation {
    std::vector<double> mass;    // eligible mass per class
    std::vector<double> admit;   // per class
    int marginal = -1;           // class with a fractional share, -1 if none
};

PriorityAllocation priority_fill(std::span<const double> class_mass, double capacity, double e_nom);

/// Mean-field chain of a priority scheduler on karma-free states. A state
/// is a block (ell, td, sd, u, s) plus, for FCFS, the interval in which the
/// user arrived; the cohort is 0 for anyone not present.
///
/// FCFS ranks every present user below s_max by arrival interval. EDF
/// ranks present users below their desired SOC by remaining deadline, then
/// offers the leftover to present users between desired SOC and s_max, again
/// by deadline.
class BenchmarkChain {
public:
    BenchmarkChain(const StateSpace& space, Scheme scheme);

    const StateSpace& space() const { return space_; }
    Scheme scheme() const { return scheme_; }
    std::size_t blocks() const { return graph_.blocks(); }
    int cohorts() const { return cohorts_; }
    std::size_t states_per_interval() const { return blocks() * static_cast<std::size_t>(cohorts_); }
    std::size_t index(std::size_t block, int cohort) const
    {
        return block * static_cast<std::size_t>(cohorts_) + static_cast<std::size_t>(cohort);
    }
    int n_classes() const;

    /// Priority class of a state, -1 if it cannot be charged.
    int priority_class(std::size_t state) const;

    PriorityAllocation allocate(int t, std::span<const double> d_t) const;

    /// Successors (index in interval t+1, probability) of one state charged
    /// with probability `admit`.
    std::vector<Weighted<std::size_t>> successors(int t, std::size_t state, double admit) const;

    void propagate(int t, std::span<const double> d_t, std::span<double> d_next) const;

    /// Everyone unarrived at the day end with s = e_nom and demand drawn
    /// from phi.
    std::vector<double> seed() const;

    /// Sums the cohorts out: T x blocks().
    std::vector<double> block_distribution(std::span<const double> d) const;

private:
    const StateSpace& space_;
    Scheme scheme_;
    TransitionTables tables_;
    kernels::BlockGraph graph_;
    int cohorts_ = 1;
    std::vector<int> ell_;    // per block
    std::vector<int> class_;  // per block, cohort-free part of the priority
};

struct BenchmarkResult {
    std::vector<double> d;   // T x states_per_interval()
    std::vector<PriorityAllocation> allocation;   // per interval, at d
    double residual = 0.0;
    int cycles = 0;
    bool converged = false;
};

/// Day-periodic distribution of the chain, by the same day-cycle iteration
/// as the karma economy.
BenchmarkResult benchmark_stationary(const BenchmarkChain& chain, const StationaryOptions& opts = {});

}  // namespace karma_ev
