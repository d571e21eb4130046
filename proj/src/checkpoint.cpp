#include "karma_ev/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace karma_ev {

static_assert(std::endian::native == std::endian::little, "checkpoint layout assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic{'K', 'E', 'V', 'C', 'K', 'P', 'T', '\0'};

class Hasher {
public:
    template <class T>
    void add(const T& v)
    {
        h_ = fnv1a(std::string_view(reinterpret_cast<const char*>(&v), sizeof v), h_);
    }
    void add(const std::vector<double>& v)
    {
        add(v.size());
        for (double x : v) add(x);
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

template <class T>
void put(std::ofstream& out, const T& v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& in)
{
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

void put_doubles(std::ofstream& out, const std::vector<double>& v)
{
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h)
{
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t params_fingerprint(const ModelParams& p)
{
    Hasher h;
    h.add(p.delta_t);
    h.add(p.t_start);
    h.add(p.t_end);
    h.add(p.e_nom);
    h.add(p.capacity);
    h.add(p.s_max);
    h.add(p.td_max);
    h.add(p.k_max);
    h.add(p.k_bar);
    h.add(p.urgency_levels);
    h.add(p.desired_soc_levels);
    h.add(p.arrival);
    h.add(p.demand);
    h.add(p.epsilon);
    h.add(p.delta_end);
    h.add(p.soc_carryover);
    return h.value();
}

void save_checkpoint(const std::string& path, const StateSpace& space, const SolverState& state)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out.write(kMagic.data(), kMagic.size());
    put(out, kCheckpointVersion);
    put(out, params_fingerprint(space.params()));
    put(out, static_cast<std::int32_t>(state.iteration));
    put(out, static_cast<std::uint64_t>(state.social.d.size()));
    put(out, static_cast<std::uint64_t>(state.social.pi.size()));
    put(out, static_cast<std::uint64_t>(state.V.size()));
    put_doubles(out, state.social.d);
    put_doubles(out, state.social.pi);
    put_doubles(out, state.V);
    out.flush();
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

SolverState load_checkpoint(const std::string& path, const StateSpace& space)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw ModelError("not a checkpoint file: " + path);
    const auto version = get<std::uint32_t>(in);
    if (version != kCheckpointVersion)
        throw ModelError("unsupported checkpoint version " + std::to_string(version));
    if (get<std::uint64_t>(in) != params_fingerprint(space.params()))
        throw ModelError("checkpoint was written for different model parameters");

    SolverState state;
    state.iteration = get<std::int32_t>(in);
    const auto n_d = get<std::uint64_t>(in);
    const auto n_pi = get<std::uint64_t>(in);
    const auto n_v = get<std::uint64_t>(in);
    if (!in) throw IoError("truncated checkpoint: " + path);
    if (n_d != space.size() || n_pi != space.action_count() || n_v != space.size())
        throw ModelError("checkpoint table sizes do not match the state space");
    auto read = [&](std::vector<double>& v, std::uint64_t n) {
        v.resize(n);
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    };
    read(state.social.d, n_d);
    read(state.social.pi, n_pi);
    read(state.V, n_v);
    if (!in) throw IoError("truncated checkpoint: " + path);
    return state;
}

}  // namespace karma_ev
