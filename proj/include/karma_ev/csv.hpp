#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "karma_ev/benchmarks.hpp"
#include "karma_ev/metrics.hpp"
#include "karma_ev/simulation.hpp"

namespace karma_ev {

/// Written as the first line of every CSV:
///   # config_hash=<16 hex digits> version=<v> seed=<n>
struct Provenance {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
};

/// Minimal CSV writer: provenance comment, header, rows. Doubles are
/// printed with 17 significant digits so reruns compare byte for byte.
/// Throws IoError if the file cannot be written.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const Provenance& prov, const std::vector<std::string>& header);

    CsvWriter& operator<<(const std::string& field);
    CsvWriter& operator<<(const char* field) { return *this << std::string(field); }
    CsvWriter& operator<<(double v);
    CsvWriter& operator<<(int v);
    void end_row();
    void close();

private:
    std::string path_;
    std::ofstream out_;
    bool first_ = true;
};

std::string format_double(double v);

/// scheme,setting,measure,urgency,value
void write_metrics(CsvWriter& csv, const std::string& scheme, const std::string& setting,
                   const MetricsBundle& m, const ModelParams& params);

/// scheme,setting,t,occupancy,admission_fraction,b_star
void write_series(CsvWriter& csv, const std::string& scheme, const std::string& setting, const MetricsBundle& m,
                  const ModelParams& params);

inline const std::vector<std::string> kMetricsHeader{"scheme", "setting", "measure", "urgency", "value"};
inline const std::vector<std::string> kSeriesHeader{"scheme", "setting", "t", "occupancy", "admission_fraction",
                                                   "b_star"};
inline const std::vector<std::string> kDiagnosticsHeader{"iteration", "exploitability", "residual"};
inline const std::vector<std::string> kTraceHeader{"day", "t", "occupancy", "slots", "b_star", "admitted",
                                                  "mean_karma"};

}  // namespace karma_ev
