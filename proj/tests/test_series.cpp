#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "singfit/csv.hpp"
#include "singfit/series.hpp"

using namespace singfit;

namespace {

ObservationSeries make(SeriesKind kind, int start_year, std::vector<double> values) {
    ObservationSeries s;
    s.kind = kind;
    s.start_year = start_year;
    s.values = std::move(values);
    return s;
}

}  // namespace

TEST_CASE("inflation_to_cpi accumulates levels from a base year") {
    // Nicaragua 1980, i = 35.1%
    auto p = inflation_to_cpi(make(SeriesKind::InflationPct, 1980, {35.1}), 1.0);
    REQUIRE(p.values.size() == 2);
    CHECK(p.start_year == 1979);
    CHECK(p.values[0] == 1.0);
    CHECK_THAT(p.values[1], Catch::Matchers::WithinRel(1.351, 1e-12));

    auto flat = inflation_to_cpi(make(SeriesKind::InflationPct, 2000, {0, 0, 0}), 1.0);
    CHECK(flat.values == std::vector<double>{1, 1, 1, 1});

    auto swing = inflation_to_cpi(make(SeriesKind::InflationPct, 2000, {100, -50}), 1.0);
    CHECK(swing.values[1] == 2.0);
    CHECK(swing.values[2] == 1.0);
}

TEST_CASE("inflation_to_cpi rejects inflation at or below -100%") {
    CHECK_THROWS_AS(inflation_to_cpi(make(SeriesKind::InflationPct, 2000, {-100.0}), 1.0),
                    data_error);
    CHECK_THROWS_AS(inflation_to_cpi(make(SeriesKind::InflationPct, 2000, {5.0}), 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(inflation_to_cpi(make(SeriesKind::PriceIndex, 2000, {1.0}), 1.0),
                    std::invalid_argument);
}

TEST_CASE("cpi_to_gri takes log returns, end-year convention") {
    auto r = cpi_to_gri(make(SeriesKind::PriceIndex, 1979, {1.0, 1.351}));
    REQUIRE(r.values.size() == 1);
    CHECK(r.start_year == 1980);
    CHECK_THAT(r.values[0], Catch::Matchers::WithinAbs(std::log(1.351), 1e-15));
    CHECK_THAT(r.values[0], Catch::Matchers::WithinAbs(0.30085, 1e-5));

    auto exact = cpi_to_gri(
        make(SeriesKind::PriceIndex, 2000, {1.0, std::exp(1.0), std::exp(2.0)}));
    CHECK_THAT(exact.values[0], Catch::Matchers::WithinAbs(1.0, 1e-14));
    CHECK_THAT(exact.values[1], Catch::Matchers::WithinAbs(1.0, 1e-14));

    auto flat = cpi_to_gri(make(SeriesKind::PriceIndex, 2000, {5.0, 5.0}));
    CHECK(flat.values[0] == 0.0);

    CHECK_THROWS_AS(cpi_to_gri(make(SeriesKind::PriceIndex, 2000, {1.0})),
                    std::invalid_argument);
    CHECK_THROWS_AS(cpi_to_gri(make(SeriesKind::PriceIndex, 2000, {1.0, -2.0})), data_error);
}

TEST_CASE("gri_to_cpi inverts cpi_to_gri") {
    auto p = gri_to_cpi(make(SeriesKind::Gri, 1980, {0.30085}), 1.0);
    REQUIRE(p.values.size() == 2);
    CHECK(p.start_year == 1979);
    CHECK_THAT(p.values[1], Catch::Matchers::WithinRel(1.351, 1e-4));

    auto base_only = gri_to_cpi(make(SeriesKind::Gri, 1980, {}), 7.0);
    CHECK(base_only.values == std::vector<double>{7.0});

    auto unit = gri_to_cpi(make(SeriesKind::Gri, 2001, {1.0, 1.0}), 1.0);
    CHECK_THAT(unit.values[1], Catch::Matchers::WithinRel(std::exp(1.0), 1e-14));
    CHECK_THAT(unit.values[2], Catch::Matchers::WithinRel(std::exp(2.0), 1e-14));

    CHECK_THROWS_AS(gri_to_cpi(make(SeriesKind::Gri, 2000, {800.0, 800.0}), 1.0),
                    std::range_error);
}

TEST_CASE("roundtrip gri_to_cpi(cpi_to_gri(s)) reproduces any positive series") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> mag(-4.0, 8.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> vals;
        const int n = 2 + static_cast<int>(rng() % 30);
        for (int i = 0; i < n; ++i) vals.push_back(std::pow(10.0, mag(rng)));
        const auto s = make(SeriesKind::PriceIndex, 1969, vals);
        const auto back = gri_to_cpi(cpi_to_gri(s), s.values[0]);
        REQUIRE(back.values.size() == s.values.size());
        CHECK(back.start_year == s.start_year);
        for (std::size_t i = 0; i < vals.size(); ++i)
            CHECK_THAT(back.values[i], Catch::Matchers::WithinRel(s.values[i], 1e-12));
    }
}

TEST_CASE("GRI equals ln(1 + i/100) through the transform chain") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> infl(-60.0, 14000.0);
    std::vector<double> rates;
    for (int i = 0; i < 20; ++i) rates.push_back(infl(rng));
    const auto gri = cpi_to_gri(inflation_to_cpi(make(SeriesKind::InflationPct, 1980, rates), 1.0));
    REQUIRE(gri.values.size() == rates.size());
    for (std::size_t i = 0; i < rates.size(); ++i)
        CHECK_THAT(gri.values[i],
                   Catch::Matchers::WithinAbs(std::log1p(rates[i] / 100.0), 1e-12));
}

TEST_CASE("normalize pins the reference year to 1 and is idempotent") {
    const auto s = make(SeriesKind::PriceIndex, 1969, {2, 4, 8});
    auto n69 = normalize(s, 1969);
    CHECK(n69.values == std::vector<double>{1, 2, 4});
    auto n70 = normalize(s, 1970);
    CHECK(n70.values == std::vector<double>{0.5, 1, 2});
    CHECK(n70.values[1] == 1.0);
    auto again = normalize(n70, 1970);
    CHECK(again.values == n70.values);
    CHECK(again.meta.normalization_year == 1970);
    CHECK_THROWS_AS(normalize(s, 1968), std::invalid_argument);
}

TEST_CASE("log_transform") {
    auto l = log_transform(make(SeriesKind::PriceIndex, 2000, {1.0, std::exp(1.0), 1.351}));
    CHECK(l.kind == SeriesKind::LogPrice);
    CHECK(l.values[0] == 0.0);
    CHECK_THAT(l.values[1], Catch::Matchers::WithinAbs(1.0, 1e-15));
    CHECK_THAT(l.values[2], Catch::Matchers::WithinAbs(0.30085, 1e-5));
    CHECK_THROWS_AS(log_transform(make(SeriesKind::PriceIndex, 2000, {0.0})), data_error);
}

TEST_CASE("window slices inclusively and composes to intersections") {
    ObservationSeries s;
    s.kind = SeriesKind::PriceIndex;
    s.start_year = 1969;
    for (int i = 0; i < 31; ++i) s.values.push_back(1.0 + i);  // 1969..1999
    auto w = window(s, 1969, 1990);
    CHECK(w.values.size() == 22);
    auto full = window(s, 1969, 1999);
    CHECK(full.values == s.values);
    auto one = window(s, 1980, 1980);
    REQUIRE(one.values.size() == 1);
    CHECK(one.start_year == 1980);

    auto composed = window(window(s, 1970, 1995), 1980, 1995).values;
    CHECK(composed == window(s, 1980, 1995).values);
    CHECK_THROWS_AS(window(s, 1990, 1980), std::invalid_argument);
    CHECK_THROWS_AS(window(s, 1950, 1960), std::invalid_argument);
}

TEST_CASE("CSV ingestion reads the bundled Nicaragua data") {
    const auto s = read_series_csv(std::string(SINGFIT_DATA_DIR) + "/nicaragua_imf2.csv",
                                   SeriesKind::InflationPct);
    REQUIRE(s.values.size() == 18);
    CHECK(s.start_year == 1980);
    CHECK(s.last_year() == 1997);
    CHECK(s.at_year(1987) == 13109.5);
    const auto imf1 = read_series_csv(std::string(SINGFIT_DATA_DIR) + "/nicaragua_imf1.csv",
                                      SeriesKind::InflationPct);
    CHECK(imf1.at_year(1988) == 14315.8);
}

TEST_CASE("CSV ingestion rejects gaps and malformed rows with line numbers") {
    {
        std::istringstream in("year,value\n1980,1.0\n1982,2.0\n");
        try {
            read_series_csv(in, SeriesKind::PriceIndex, "gap.csv");
            FAIL("expected data_error");
        } catch (const data_error& e) {
            CHECK(std::string(e.what()).find("gap.csv:3") != std::string::npos);
        }
    }
    {
        std::istringstream in("year,value\n1980;1.0\n");
        CHECK_THROWS_AS(read_series_csv(in, SeriesKind::PriceIndex), data_error);
    }
    {
        std::istringstream in("nope\n");
        CHECK_THROWS_AS(read_series_csv(in, SeriesKind::PriceIndex), data_error);
    }
}

TEST_CASE("CSV roundtrip preserves values exactly") {
    const auto s = make(SeriesKind::PriceIndex, 1969, {1.0, 1.351, 12345.6789012345});
    std::ostringstream out;
    write_series_csv(out, s);
    std::istringstream in(out.str());
    const auto back = read_series_csv(in, SeriesKind::PriceIndex);
    CHECK(back.start_year == s.start_year);
    CHECK(back.values == s.values);
}
