#pragma once

#include <cmath>
#include <string>

#include "singfit/errors.hpp"
#include "singfit/parameters.hpp"

namespace singfit {

namespace detail {

inline double tau_of(const ParameterSet& ps, double t) { return (t - ps.t0) / ps.dt; }

inline void check_before_singularity(const ParameterSet& ps, double t) {
    // Guard: curves are only evaluated up to t_c - 1e-9 dt.
    if (t > ps.t_c() - 1e-9 * ps.dt)
        throw singularity_error("t = " + std::to_string(t) + " at or past t_c = " +
                                std::to_string(ps.t_c()));
}

}  // namespace detail

/// Constant-rate log price: p(t) = p0 + r0 (t - t0)/dt.
inline double cagan_log_price(const ParameterSet& ps, double t) {
    return ps.p0 + ps.r0 * detail::tau_of(ps, t);
}

/// Linear-feedback rate: r(t) = r0 exp(a_p (t - t0)/dt).
inline double lf_rate(const ParameterSet& ps, double t) {
    const double r = ps.r0 * std::exp(ps.a_p() * detail::tau_of(ps, t));
    if (!std::isfinite(r)) throw std::range_error("lf_rate overflow");
    return r;
}

/// Linear-feedback log price: p(t) = p0 + (r0/a_p)(exp(a_p tau) - 1).
inline double lf_log_price(const ParameterSet& ps, double t) {
    const double a = ps.a_p();
    if (!(a > 0.0)) throw std::invalid_argument("lf_log_price requires a_p > 0");
    const double p = ps.p0 + (ps.r0 / a) * std::expm1(a * detail::tau_of(ps, t));
    if (!std::isfinite(p)) throw std::range_error("lf_log_price overflow");
    return p;
}

/// Power-law rate with finite-time singularity:
/// r(t) = r0 ((t_c - t0)/(t_c - t))^(1/beta), valid for t < t_c.
inline double nlf_rate(const ParameterSet& ps, double t) {
    if (!(ps.beta > 0.0)) throw std::invalid_argument("nlf_rate requires beta > 0");
    detail::check_before_singularity(ps, t);
    const double tc = ps.t_c();
    const double r = ps.r0 * std::pow((tc - ps.t0) / (tc - t), 1.0 / ps.beta);
    if (!std::isfinite(r)) throw std::range_error("nlf_rate overflow");
    return r;
}

/// Log price diverging at t_c, the 0 < beta < 1 branch:
/// p(t) = p0 + (r0 beta/(1-beta)) ((t_c-t0)/dt) [((t_c-t0)/(t_c-t))^((1-beta)/beta) - 1].
inline double nlf_log_price(const ParameterSet& ps, double t) {
    if (!(ps.beta > 0.0)) throw std::invalid_argument("nlf_log_price requires beta > 0");
    if (ps.beta >= 1.0)
        throw unsupported_branch_error("nlf_log_price: beta >= 1 branch not supported");
    detail::check_before_singularity(ps, t);
    const double tc = ps.t_c();
    const double span = (tc - ps.t0) / ps.dt;
    const double expo = (1.0 - ps.beta) / ps.beta;
    const double bracket = std::expm1(expo * std::log((tc - ps.t0) / (tc - t)));
    const double p = ps.p0 + ps.r0 * ps.beta / (1.0 - ps.beta) * span * bracket;
    if (!std::isfinite(p)) throw std::range_error("nlf_log_price overflow");
    return p;
}

/// alpha = (1 - beta)/beta.
inline double beta_to_alpha(double beta) {
    if (!(beta > 0.0)) throw no_singularity_error("beta = 0 maps to infinite alpha");
    if (beta > 1.0) throw std::invalid_argument("beta_to_alpha requires beta <= 1");
    return (1.0 - beta) / beta;
}

/// beta = 1/(1 + alpha).
inline double alpha_to_beta(double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("alpha_to_beta requires alpha >= 0");
    return 1.0 / (1.0 + alpha);
}

/// Convert an (alpha, A, B, t_c) set to the native parameterization:
/// r0/dt = alpha B/(t_c - t0)^(1+alpha), beta = 1/(1+alpha), p0 = A + B/(t_c - t0)^alpha.
inline ParameterSet stz_to_native(const StzParameterSet& stz, double t0, double dt) {
    if (!(stz.t_c > t0)) throw std::invalid_argument("stz_to_native: t_c must exceed t0");
    if (!(stz.alpha > 0.0)) throw std::invalid_argument("stz_to_native: alpha must be positive");
    if (stz.B == 0.0 || !std::isfinite(stz.B))
        throw std::invalid_argument("stz_to_native: B must be finite and nonzero");
    const double span = stz.t_c - t0;
    const double r0 = dt * stz.alpha * stz.B / std::pow(span, 1.0 + stz.alpha);
    const double p0 = stz.A + stz.B / std::pow(span, stz.alpha);
    return ParameterSet::nlf_with_tc(t0, dt, p0, r0, alpha_to_beta(stz.alpha), stz.t_c);
}

/// Algebraic inverse of stz_to_native.
inline StzParameterSet native_to_stz(const ParameterSet& ps) {
    if (!(ps.beta > 0.0) || ps.beta >= 1.0)
        throw std::invalid_argument("native_to_stz requires 0 < beta < 1");
    StzParameterSet stz;
    stz.alpha = beta_to_alpha(ps.beta);
    stz.t_c = ps.t_c();
    const double span = stz.t_c - ps.t0;
    stz.B = ps.r0 * std::pow(span, 1.0 + stz.alpha) / (stz.alpha * ps.dt);
    stz.A = ps.p0 - stz.B / std::pow(span, stz.alpha);
    return stz;
}

/// Rate implied when raw P(t), not ln P, follows the diverging log-price
/// curve: the power-law rate divided by that curve's value.
inline double stz_derived_rate(const ParameterSet& ps, double t) {
    const double denom = nlf_log_price(ps, t);
    const double num = nlf_rate(ps, t);
    const double scale = std::abs(ps.p0) + std::abs(denom - ps.p0);
    if (std::abs(denom) <= 1e-9 * scale)
        throw pole_error("stz_derived_rate: denominator vanished at t = " + std::to_string(t));
    return num / denom;
}

/// Straight-line asymptote of ln ln[P(t)/P0] in the LF model:
/// ln(r0/a_p) + a_p (t - t0)/dt.
inline double lnln_asymptote(const ParameterSet& ps, double t) {
    const double a = ps.a_p();
    if (!(a > 0.0)) throw std::invalid_argument("lnln_asymptote requires a_p > 0");
    return std::log(ps.r0 / a) + a * detail::tau_of(ps, t);
}

/// Generalized exponential rate r0 e_q^x with q = 1 + beta and
/// x = a_p r0^beta tau. Coincides with nlf_rate for beta > 0 and with
/// lf_rate for beta = 0.
inline double q_exponential_rate(const ParameterSet& ps, double t) {
    const double tau = detail::tau_of(ps, t);
    if (ps.beta == 0.0) return lf_rate(ps, t);
    detail::check_before_singularity(ps, t);
    const double x = ps.a_p() * std::pow(ps.r0, ps.beta) * tau;
    const double base = 1.0 - ps.beta * x;
    if (base <= 0.0) throw singularity_error("q_exponential_rate at or past t_c");
    const double r = ps.r0 * std::pow(base, -1.0 / ps.beta);
    if (!std::isfinite(r)) throw std::range_error("q_exponential_rate overflow");
    return r;
}

/// Model log price dispatched by family (StzDirect shares the NLF curve;
/// its raw-price reading is handled by the objective, not here).
inline double model_log_price(ModelFamily family, const ParameterSet& ps, double t) {
    switch (family) {
        case ModelFamily::Cagan: return cagan_log_price(ps, t);
        case ModelFamily::LinearFeedback: return lf_log_price(ps, t);
        case ModelFamily::NonlinearFeedback:
        case ModelFamily::StzDirect: return nlf_log_price(ps, t);
    }
    throw std::invalid_argument("unknown model family");
}

/// Model rate dispatched by family.
inline double model_rate(ModelFamily family, const ParameterSet& ps, double t) {
    switch (family) {
        case ModelFamily::Cagan: return ps.r0;
        case ModelFamily::LinearFeedback: return lf_rate(ps, t);
        case ModelFamily::NonlinearFeedback: return nlf_rate(ps, t);
        case ModelFamily::StzDirect: return stz_derived_rate(ps, t);
    }
    throw std::invalid_argument("unknown model family");
}

}  // namespace singfit
