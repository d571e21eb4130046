#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "karma_ev/checkpoint.hpp"
#include "karma_ev/config.hpp"
#include "karma_ev/csv.hpp"

using namespace karma_ev;

namespace {

std::string scratch(const std::string& name)
{
    const auto dir = std::filesystem::path(KARMA_EV_BINARY_DIR) / "io_scratch";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("checkpoint round trip")
{
    const StateSpace space(desk_scale());
    SolverState s;
    s.iteration = 17;
    s.social.pi = uniform_policy(space);
    s.social.d.assign(space.size(), 0.0);
    for (std::size_t i = 0; i < s.social.d.size(); ++i) s.social.d[i] = 1.0 / (1.0 + static_cast<double>(i));
    s.V.assign(space.size(), -1.0 / 3.0);
    const std::string path = scratch("ck.bin");
    save_checkpoint(path, space, s);
    const SolverState back = load_checkpoint(path, space);
    CHECK(back.iteration == 17);
    CHECK(back.social.d == s.social.d);
    CHECK(back.social.pi == s.social.pi);
    CHECK(back.V == s.V);
    CHECK(slurp(path).substr(0, 7) == "KEVCKPT");

    // Another model refuses the file.
    ModelParams other = desk_scale();
    other.delta_end = 0.95;
    CHECK_THROWS_AS(load_checkpoint(path, StateSpace(other)), ModelError);
    // Truncated and missing files.
    const std::string cut = scratch("cut.bin");
    {
        const std::string bytes = slurp(path);
        std::ofstream(cut, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
    }
    CHECK_THROWS(load_checkpoint(cut, space));
    CHECK_THROWS_AS(load_checkpoint(scratch("missing.bin"), space), IoError);
    CHECK_THROWS_AS(save_checkpoint("/nonexistent/dir/ck.bin", space, s), IoError);
}

TEST_CASE("fnv1a reference values")
{
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("csv layout")
{
    const std::string path = scratch("m.csv");
    {
        CsvWriter csv(path, {0x1234abcdULL, 42}, kMetricsHeader);
        MetricsBundle m;
        m.avg_wait = 0.1;
        m.avg_wait_per_interval = 0.1 / 6.0;
        m.avg_payoff = -0.25;
        m.urgency_prob = {0.75, 0.25};
        m.wait_mass = {0.075, 0.025};
        write_metrics(csv, "fcfs", "desk", m, desk_scale());
        csv.close();
    }
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == std::string("# config_hash=000000001234abcd version=") + kVersion + " seed=42");
    std::getline(in, line);
    CHECK(line == "scheme,setting,measure,urgency,value");
    std::getline(in, line);
    CHECK(line == "fcfs,desk,avg_wait,,0.10000000000000001");
    int rows = 0;
    bool u9 = false;
    while (std::getline(in, line)) {
        ++rows;
        if (line.rfind("fcfs,desk,wait_by_urgency,9,", 0) == 0) u9 = true;
    }
    CHECK(rows == 4);
    CHECK(u9);
    CHECK(format_double(-0.25) == "-0.25");
    CHECK_THROWS_AS(CsvWriter("/nonexistent/dir/x.csv", {}, kMetricsHeader), IoError);
}
