#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "karma_ev/equilibrium.hpp"

namespace karma_ev {

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

/// Hash of every field of the parameters, bit-exact on the doubles.
std::uint64_t params_fingerprint(const ModelParams& params);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes (iteration, d, pi, V) in a versioned little-endian binary layout:
///   "KEVCKPT\0" | u32 version | u64 fingerprint | i32 iteration
///   | u64 n_d | u64 n_pi | u64 n_v | doubles...
/// Throws IoError on I/O failure.
void save_checkpoint(const std::string& path, const StateSpace& space, const SolverState& state);

/// Reads a checkpoint and checks it against the state space; throws
/// ModelError on a version, fingerprint or size mismatch and IoError on
/// I/O failure.
SolverState load_checkpoint(const std::string& path, const StateSpace& space);

}  // namespace karma_ev
