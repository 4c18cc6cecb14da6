#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "singfit/models.hpp"
#include "singfit/series.hpp"

namespace singfit {

/// Discrete-recursion settings. The recursions advance on a stride-2dt
/// lattice, so two seed values are needed, one per sublattice.
struct RecursionSpec {
    ModelFamily family = ModelFamily::Cagan;  // StzDirect has no recursion
    double r_init_even = 0.1;
    double r_init_odd = 0.1;
    double a_p = 0.0;
    double beta = 0.0;
    int steps = 0;          // number of values after the two seeds
    int start_year = 1969;
    double dt = 1.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    double blowup_factor = 100.0;  // r > blowup_factor * r_init flags divergence
};

struct RecursionResult {
    ObservationSeries rates;              // interleaved sublattices, kind Gri
    std::optional<int> blowup_step;       // first step index past the blowup factor
    std::optional<int> overflow_step;     // step at which values stopped being finite
};

/// Run the stride-2dt GRI recursion
///   r(t + dt) = r(t - dt) + 2 a_p [r(t - dt)]^(1+beta)
/// (Cagan: plain copy-forward, beta = 0 reduces to the linear-feedback
/// form). The two sublattices are interleaved into a single annual series.
/// On overflow the series is truncated at the last finite value.
inline RecursionResult iterate_rates(const RecursionSpec& spec) {
    if (spec.steps < 0) throw std::invalid_argument("steps must be >= 0");
    if (!(spec.r_init_even > 0.0) || !(spec.r_init_odd > 0.0))
        throw std::invalid_argument("seed rates must be positive");
    if (spec.noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be >= 0");
    if (spec.family == ModelFamily::StzDirect)
        throw std::invalid_argument("no recursion is defined for the STZ-direct variant");

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, spec.noise_sigma);

    RecursionResult out;
    out.rates.start_year = spec.start_year;
    out.rates.dt = spec.dt;
    out.rates.kind = SeriesKind::Gri;

    const double r_ref = std::min(spec.r_init_even, spec.r_init_odd);
    double sub[2] = {spec.r_init_even, spec.r_init_odd};
    const int total = spec.steps + 2;
    for (int n = 0; n < total; ++n) {
        double r = sub[n % 2];
        if (!std::isfinite(r)) {
            out.overflow_step = n;
            break;
        }
        if (spec.noise_sigma > 0.0) r += gauss(rng);
        out.rates.values.push_back(r);
        if (!out.blowup_step && sub[n % 2] > spec.blowup_factor * r_ref) out.blowup_step = n;
        // advance the sublattice this value came from
        double& cur = sub[n % 2];
        switch (spec.family) {
            case ModelFamily::Cagan:
                break;  // r(t + dt) = r(t - dt)
            case ModelFamily::LinearFeedback:
                cur = cur + 2.0 * spec.a_p * cur;
                break;
            case ModelFamily::NonlinearFeedback:
                cur = cur + 2.0 * spec.a_p * std::pow(cur, 1.0 + spec.beta);
                break;
            case ModelFamily::StzDirect:
                break;  // unreachable
        }
    }
    return out;
}

/// Accumulate prices from simulated rates (same convention as gri_to_cpi).
inline ObservationSeries integrate_prices(const ObservationSeries& rates, double p_base) {
    return gri_to_cpi(rates, p_base);
}

/// Sample a closed-form model curve annually over [from_year, to_year],
/// optionally adding i.i.d. Gaussian noise to the log price.
inline ObservationSeries synthesize(const ParameterSet& ps, ModelFamily family, int from_year,
                                    int to_year, double noise_sigma = 0.0,
                                    std::uint64_t seed = 0) {
    if (from_year > to_year) throw std::invalid_argument("empty year range");
    if (noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be >= 0");
    if (family == ModelFamily::StzDirect)
        throw std::invalid_argument("the STZ-direct variant is a fitting trick, not a generator");
    if (family == ModelFamily::NonlinearFeedback && static_cast<double>(to_year) >= ps.t_c())
        throw singularity_error("requested years reach past t_c");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, noise_sigma);

    ObservationSeries s;
    s.start_year = from_year;
    s.dt = ps.dt;
    s.kind = SeriesKind::PriceIndex;
    s.values.reserve(static_cast<std::size_t>(to_year - from_year + 1));
    for (int year = from_year; year <= to_year; ++year) {
        double p = model_log_price(family, ps, static_cast<double>(year));
        if (noise_sigma > 0.0) p += gauss(rng);
        s.values.push_back(std::exp(p));
    }
    s.validate();
    return s;
}

}  // namespace singfit
