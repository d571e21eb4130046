#include "karma_ev/csv.hpp"

#include <cstdio>

#include "karma_ev/config.hpp"

namespace karma_ev {

std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const Provenance& prov, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::trunc)
{
    if (!out_) throw IoError("cannot open for writing: " + path);
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(prov.config_hash));
    out_ << "# config_hash=" << hash << " version=" << kVersion << " seed=" << prov.seed << '\n';
    for (const auto& h : header) *this << h;
    end_row();
}

CsvWriter& CsvWriter::operator<<(const std::string& field)
{
    if (!first_) out_ << ',';
    out_ << field;
    first_ = false;
    return *this;
}

CsvWriter& CsvWriter::operator<<(double v) { return *this << format_double(v); }

CsvWriter& CsvWriter::operator<<(int v) { return *this << std::to_string(v); }

void CsvWriter::end_row()
{
    out_ << '\n';
    first_ = true;
}

void CsvWriter::close()
{
    out_.close();
    if (!out_) throw IoError("failed writing " + path_);
}

void write_metrics(CsvWriter& csv, const std::string& scheme, const std::string& setting, const MetricsBundle& m,
                   const ModelParams& params)
{
    auto row = [&](const char* measure, const std::string& urgency, double value) {
        csv << scheme << setting << measure << urgency << value;
        csv.end_row();
    };
    row("avg_wait", "", m.avg_wait);
    row("avg_wait_per_interval", "", m.avg_wait_per_interval);
    row("avg_payoff", "", m.avg_payoff);
    for (int u = 0; u < params.n_urgency(); ++u) {
        if (m.urgency_prob[static_cast<std::size_t>(u)] <= 0.0) continue;
        row("wait_by_urgency", format_double(params.urgency_levels[static_cast<std::size_t>(u)]), m.wait_by_urgency(u));
    }
}

void write_series(CsvWriter& csv, const std::string& scheme, const std::string& setting, const MetricsBundle& m,
                  const ModelParams& params)
{
    for (std::size_t t = 0; t < m.occupancy.size(); ++t) {
        csv << scheme << setting << params.clock(static_cast<int>(t)) << m.occupancy[t] << m.admission_fraction[t];
        if (t < m.b_star.size()) csv << m.b_star[t];
        else csv << "NA";
        csv.end_row();
    }
}

}  // namespace karma_ev
