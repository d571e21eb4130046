#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "karma_ev/transitions.hpp"

// Inner loops of the mean-field solver.
//
// The serial kernels enumerate successors action by action and are kept as
// the reference the tests compare against. The parallel kernels exploit
// that karma moves only through post-payment karma while every other
// component moves through (block, allocation outcome), where a block is
// the state with its karma stripped. They work on a static block graph and
// a per-block karma vector, write every output entry from exactly one
// thread, and so do not depend on the thread count.
namespace karma_ev::kernels {

/// Non-karma transitions of every interval. Source ids are
/// 2 * block + charged, destinations are blocks of the next interval.
class BlockGraph {
public:
    BlockGraph(const StateSpace& space, const TransitionTables& tables);

    std::size_t blocks() const { return n_blocks_; }

    struct Edge {
        std::uint32_t node;   // destination block (forward) or source id (reverse)
        double w;
    };

    std::span<const Edge> out(int t, std::size_t src) const
    {
        const auto& g = fwd_[static_cast<std::size_t>(t)];
        return {g.edges.data() + g.offset[src], g.offset[src + 1] - g.offset[src]};
    }
    std::span<const Edge> in(int t, std::size_t block) const
    {
        const auto& g = rev_[static_cast<std::size_t>(t)];
        return {g.edges.data() + g.offset[block], g.offset[block + 1] - g.offset[block]};
    }

private:
    struct Csr {
        std::vector<std::size_t> offset;
        std::vector<Edge> edges;
    };
    std::size_t n_blocks_ = 0;
    std::vector<Csr> fwd_;
    std::vector<Csr> rev_;
};

/// Scratch memory reused across calls of the parallel kernels.
struct Workspace {
    std::vector<double> buffer;
};

/// d_next[x+] = sum_{x, b} d_t[x] pi_t[b | x] p[x+ | x, b].
void propagate_serial(const StateSpace& space, const TransitionTables& tables, const IntervalSnapshot& snap,
                      std::span<const double> d_t, std::span<const double> pi_t, std::span<double> d_next);

void propagate_parallel(const StateSpace& space, const BlockGraph& graph, const IntervalSnapshot& snap,
                        std::span<const double> d_t, std::span<const double> pi_t, std::span<double> d_next,
                        Workspace& work);

/// One Bellman backup of interval t:
///   q_t[x, b] = r[x] + discount * sum_{x+} p[x+ | x, b] v_next[x+]
///   v_t[x]    = sum_b pi_t[b | x] q_t[x, b]
void backup_serial(const StateSpace& space, const TransitionTables& tables, const IntervalSnapshot& snap,
                   double discount, std::span<const double> v_next, std::span<const double> pi_t,
                   std::span<double> v_t, std::span<double> q_t);

void backup_parallel(const StateSpace& space, const BlockGraph& graph, const IntervalSnapshot& snap,
                     double discount, std::span<const double> v_next, std::span<const double> pi_t,
                     std::span<double> v_t, std::span<double> q_t, Workspace& work);

/// 0.5 * sum |a - b|.
double total_variation(std::span<const double> a, std::span<const double> b);

}  // namespace karma_ev::kernels
