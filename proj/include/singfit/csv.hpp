#pragma once

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include "singfit/errors.hpp"
#include "singfit/series.hpp"

namespace singfit {

/// Read a two-column `year,value` CSV (header required, '.' decimals).
/// Years must be consecutive; a gap is an ingestion error, not a NaN.
inline ObservationSeries read_series_csv(std::istream& in, SeriesKind kind,
                                         const std::string& name = "<stream>") {
    ObservationSeries s;
    s.kind = kind;
    std::string line;
    if (!std::getline(in, line)) throw data_error(name + ": empty file");
    // tolerate a BOM and whitespace in the header
    if (line.find("year") == std::string::npos || line.find("value") == std::string::npos)
        throw data_error(name + ":1: expected header 'year,value'");
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw data_error(name + ":" + std::to_string(lineno) + ": missing comma");
        int year = 0;
        double value = 0.0;
        try {
            std::size_t used = 0;
            year = std::stoi(line.substr(0, comma), &used);
            value = std::stod(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw data_error(name + ":" + std::to_string(lineno) + ": malformed row '" + line +
                             "'");
        }
        if (s.values.empty()) {
            s.start_year = year;
        } else if (year != s.last_year() + 1) {
            throw data_error(name + ":" + std::to_string(lineno) + ": year " +
                             std::to_string(year) + " breaks the annual sequence (expected " +
                             std::to_string(s.last_year() + 1) + ")");
        }
        s.values.push_back(value);
    }
    s.validate();
    return s;
}

inline ObservationSeries read_series_csv(const std::string& path, SeriesKind kind) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open " + path);
    return read_series_csv(in, kind, path);
}

inline void write_series_csv(std::ostream& out, const ObservationSeries& s) {
    out << "year,value\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < s.values.size(); ++i)
        out << s.year_of(i) << ',' << s.values[i] << '\n';
}

inline void write_series_csv(const std::string& path, const ObservationSeries& s) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    write_series_csv(out, s);
}

}  // namespace singfit
