#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "singfit/errors.hpp"

namespace singfit {

enum class SeriesKind { PriceIndex, InflationPct, LogPrice, Gri };

inline const char* to_string(SeriesKind k) {
    switch (k) {
        case SeriesKind::PriceIndex: return "price";
        case SeriesKind::InflationPct: return "inflation";
        case SeriesKind::LogPrice: return "logprice";
        case SeriesKind::Gri: return "gri";
    }
    return "?";
}

struct SeriesMeta {
    std::string country_label;
    std::string source_label;
    std::optional<int> normalization_year;
};

/// Annual time series. Values are equally spaced, dt years apart, starting
/// at start_year. The kind tag decides which transforms apply.
struct ObservationSeries {
    int start_year = 0;
    double dt = 1.0;
    std::vector<double> values;
    SeriesKind kind = SeriesKind::PriceIndex;
    SeriesMeta meta;

    std::size_t size() const { return values.size(); }
    int year_of(std::size_t i) const { return start_year + static_cast<int>(i); }
    int last_year() const { return year_of(values.size() - 1); }

    /// Index of a calendar year, or error if outside the range.
    std::size_t index_of(int year) const {
        if (values.empty() || year < start_year || year > last_year())
            throw std::invalid_argument("year " + std::to_string(year) +
                                        " outside series range " + std::to_string(start_year) +
                                        ".." + std::to_string(values.empty() ? start_year : last_year()));
        return static_cast<std::size_t>(year - start_year);
    }

    double at_year(int year) const { return values[index_of(year)]; }

    /// Checks the per-kind invariants; throws data_error on violation.
    void validate() const {
        if (values.empty()) throw data_error("series is empty");
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double v = values[i];
            if (!std::isfinite(v))
                throw data_error("non-finite value at year " + std::to_string(year_of(i)));
            if (kind == SeriesKind::PriceIndex && v <= 0.0)
                throw data_error("non-positive price " + std::to_string(v) + " at year " +
                                 std::to_string(year_of(i)));
            if (kind == SeriesKind::InflationPct && v <= -100.0)
                throw data_error("inflation <= -100% at year " + std::to_string(year_of(i)));
        }
        if (meta.normalization_year &&
            (*meta.normalization_year < start_year || *meta.normalization_year > last_year()))
            throw data_error("normalization year outside series range");
    }
};

/// Accumulate a CPI level series from annual inflation percentages.
/// The base level is prepended one period before the first inflation
/// observation, so the output is one element longer than the input.
inline ObservationSeries inflation_to_cpi(const ObservationSeries& s, double base) {
    if (s.kind != SeriesKind::InflationPct)
        throw std::invalid_argument("inflation_to_cpi requires an inflation series");
    if (!(base > 0.0)) throw std::invalid_argument("base price must be positive");
    s.validate();
    ObservationSeries out;
    out.start_year = s.start_year - 1;
    out.dt = s.dt;
    out.kind = SeriesKind::PriceIndex;
    out.meta = s.meta;
    out.values.reserve(s.values.size() + 1);
    out.values.push_back(base);
    double level = base;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const double infl = s.values[i];
        if (infl <= -100.0)
            throw data_error("inflation <= -100% at year " + std::to_string(s.year_of(i)));
        level *= 1.0 + infl / 100.0;
        out.values.push_back(level);
    }
    return out;
}

/// Growth rate index r_k = ln(P_{k+1}/P_k). Each r is assigned to the END
/// year of its interval, so the output starts one year after the input.
inline ObservationSeries cpi_to_gri(const ObservationSeries& s) {
    if (s.kind != SeriesKind::PriceIndex)
        throw std::invalid_argument("cpi_to_gri requires a price series");
    if (s.values.size() < 2)
        throw std::invalid_argument("cpi_to_gri needs at least two points");
    s.validate();
    ObservationSeries out;
    out.start_year = s.start_year + 1;
    out.dt = s.dt;
    out.kind = SeriesKind::Gri;
    out.meta = s.meta;
    out.values.reserve(s.values.size() - 1);
    for (std::size_t i = 0; i + 1 < s.values.size(); ++i)
        out.values.push_back(std::log(s.values[i + 1] / s.values[i]));
    return out;
}

/// Inverse of cpi_to_gri: P_0 = p_base, P_{k+1} = P_k exp(r_k).
/// The base level sits one year before the first rate.
inline ObservationSeries gri_to_cpi(const ObservationSeries& r, double p_base) {
    if (r.kind != SeriesKind::Gri)
        throw std::invalid_argument("gri_to_cpi requires a GRI series");
    if (!(p_base > 0.0)) throw std::invalid_argument("base price must be positive");
    ObservationSeries out;
    out.start_year = r.start_year - 1;
    out.dt = r.dt;
    out.kind = SeriesKind::PriceIndex;
    out.meta = r.meta;
    out.values.reserve(r.values.size() + 1);
    out.values.push_back(p_base);
    double level = p_base;
    for (double rate : r.values) {
        level *= std::exp(rate);
        if (!std::isfinite(level)) throw std::range_error("price overflow in gri_to_cpi");
        out.values.push_back(level);
    }
    return out;
}

/// Rescale so that P(year) = 1 exactly.
inline ObservationSeries normalize(const ObservationSeries& s, int year) {
    if (s.kind != SeriesKind::PriceIndex)
        throw std::invalid_argument("normalize requires a price series");
    s.validate();
    const double ref = s.at_year(year);
    ObservationSeries out = s;
    for (double& v : out.values) v /= ref;
    out.values[s.index_of(year)] = 1.0;
    out.meta.normalization_year = year;
    return out;
}

inline ObservationSeries log_transform(const ObservationSeries& s) {
    if (s.kind != SeriesKind::PriceIndex)
        throw std::invalid_argument("log_transform requires a price series");
    s.validate();
    ObservationSeries out = s;
    out.kind = SeriesKind::LogPrice;
    for (double& v : out.values) v = std::log(v);
    return out;
}

/// Inclusive slice [from_year, to_year]; metadata preserved.
inline ObservationSeries window(const ObservationSeries& s, int from_year, int to_year) {
    if (from_year > to_year)
        throw std::invalid_argument("empty window " + std::to_string(from_year) + ".." +
                                    std::to_string(to_year));
    const std::size_t a = s.index_of(from_year);
    const std::size_t b = s.index_of(to_year);
    ObservationSeries out;
    out.start_year = from_year;
    out.dt = s.dt;
    out.kind = s.kind;
    out.meta = s.meta;
    out.values.assign(s.values.begin() + static_cast<std::ptrdiff_t>(a),
                      s.values.begin() + static_cast<std::ptrdiff_t>(b) + 1);
    return out;
}

}  // namespace singfit
