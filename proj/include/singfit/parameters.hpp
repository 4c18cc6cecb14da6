#pragma once

#include <cmath>
#include <optional>
#include <string>

#include <json.hpp>

#include "singfit/errors.hpp"

namespace singfit {

/// Critical time from Eq.-of-motion closure: (t_c - t0)/dt = 1/(beta a_p r0^beta).
inline double critical_time(double t0, double dt, double r0, double beta, double a_p) {
    if (!(dt > 0.0) || !(r0 > 0.0) || !(a_p > 0.0))
        throw std::invalid_argument("critical_time: dt, r0, a_p must be positive");
    if (!(beta > 0.0)) throw no_singularity_error("beta = 0 has no finite critical time");
    return t0 + dt / (beta * a_p * std::pow(r0, beta));
}

/// Inverse closure: a_p = dt / (beta r0^beta (t_c - t0)).
inline double feedback_strength(double t0, double dt, double r0, double beta, double t_c) {
    if (!(dt > 0.0) || !(r0 > 0.0))
        throw std::invalid_argument("feedback_strength: dt and r0 must be positive");
    if (!(beta > 0.0)) throw no_singularity_error("beta = 0 has no finite critical time");
    if (!(t_c > t0)) throw std::invalid_argument("feedback_strength: t_c must exceed t0");
    return dt / (beta * std::pow(r0, beta) * (t_c - t0));
}

/// Model parameters (t0, dt, p0, r0, beta, and one of {a_p, t_c}).
/// For beta > 0 exactly one of a_p / t_c is stored; the other is derived
/// through the closure above. For beta = 0 (Cagan, LF) only a_p applies.
struct ParameterSet {
    double t0 = 0.0;
    double dt = 1.0;
    double p0 = 0.0;
    double r0 = 0.0;
    double beta = 0.0;

    static ParameterSet cagan(double t0, double dt, double p0, double r0) {
        ParameterSet ps;
        ps.t0 = t0; ps.dt = dt; ps.p0 = p0; ps.r0 = r0;
        return ps;
    }

    static ParameterSet linear_feedback(double t0, double dt, double p0, double r0, double a_p) {
        ParameterSet ps;
        ps.t0 = t0; ps.dt = dt; ps.p0 = p0; ps.r0 = r0;
        ps.stored_a_p_ = a_p;
        return ps;
    }

    static ParameterSet nlf_with_tc(double t0, double dt, double p0, double r0, double beta,
                                    double t_c) {
        if (!(beta > 0.0)) throw std::invalid_argument("NLF requires beta > 0");
        if (!(t_c > t0)) throw std::invalid_argument("t_c must exceed t0");
        ParameterSet ps;
        ps.t0 = t0; ps.dt = dt; ps.p0 = p0; ps.r0 = r0; ps.beta = beta;
        ps.stored_t_c_ = t_c;
        return ps;
    }

    static ParameterSet nlf_with_ap(double t0, double dt, double p0, double r0, double beta,
                                    double a_p) {
        if (!(beta > 0.0)) throw std::invalid_argument("NLF requires beta > 0");
        ParameterSet ps;
        ps.t0 = t0; ps.dt = dt; ps.p0 = p0; ps.r0 = r0; ps.beta = beta;
        ps.stored_a_p_ = a_p;
        return ps;
    }

    bool has_singularity() const { return beta > 0.0; }

    double a_p() const {
        if (stored_a_p_) return *stored_a_p_;
        if (stored_t_c_) return feedback_strength(t0, dt, r0, beta, *stored_t_c_);
        return 0.0;  // Cagan
    }

    double t_c() const {
        if (!has_singularity()) throw no_singularity_error("beta = 0: no critical time");
        if (stored_t_c_) return *stored_t_c_;
        return critical_time(t0, dt, r0, beta, a_p());
    }

    std::optional<double> stored_a_p_;
    std::optional<double> stored_t_c_;
};

/// (alpha, A, B, t_c) parameterization used when fitting raw P(t).
struct StzParameterSet {
    double alpha = 0.0;
    double A = 0.0;
    double B = 0.0;
    double t_c = 0.0;
};

enum class ModelFamily { Cagan, LinearFeedback, NonlinearFeedback, StzDirect };
enum class Objective { LogCpi, RawCpi, JointGriLogCpi };

inline const char* to_string(ModelFamily f) {
    switch (f) {
        case ModelFamily::Cagan: return "cagan";
        case ModelFamily::LinearFeedback: return "lf";
        case ModelFamily::NonlinearFeedback: return "nlf";
        case ModelFamily::StzDirect: return "stz";
    }
    return "?";
}

inline const char* to_string(Objective o) {
    switch (o) {
        case Objective::LogCpi: return "logcpi";
        case Objective::RawCpi: return "rawcpi";
        case Objective::JointGriLogCpi: return "joint";
    }
    return "?";
}

struct ModelSpec {
    ModelFamily family = ModelFamily::NonlinearFeedback;
    Objective objective = Objective::LogCpi;

    void validate() const {
        if (family == ModelFamily::StzDirect && objective != Objective::RawCpi)
            throw std::invalid_argument("StzDirect implies the raw-CPI objective");
    }
};

inline void to_json(nlohmann::json& j, const ParameterSet& ps) {
    j = nlohmann::json{{"t0", ps.t0}, {"dt", ps.dt}, {"p0", ps.p0}, {"r0", ps.r0},
                       {"beta", ps.beta}};
    if (ps.has_singularity()) {
        j["t_c"] = ps.t_c();
        j["a_p"] = ps.a_p();
    } else if (ps.stored_a_p_) {
        j["t_c"] = nullptr;
        j["a_p"] = *ps.stored_a_p_;
    } else {
        j["t_c"] = nullptr;
        j["a_p"] = 0.0;
    }
}

inline void from_json(const nlohmann::json& j, ParameterSet& ps) {
    ps = ParameterSet{};
    ps.t0 = j.at("t0").get<double>();
    ps.dt = j.at("dt").get<double>();
    ps.p0 = j.at("p0").get<double>();
    ps.r0 = j.at("r0").get<double>();
    ps.beta = j.value("beta", 0.0);
    if (ps.beta > 0.0 && j.contains("t_c") && !j.at("t_c").is_null())
        ps.stored_t_c_ = j.at("t_c").get<double>();  // a_p re-derived
    else if (j.contains("a_p") && !j.at("a_p").is_null() && j.at("a_p").get<double>() > 0.0)
        ps.stored_a_p_ = j.at("a_p").get<double>();
}

}  // namespace singfit
