#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "singfit/linalg.hpp"
#include "singfit/models.hpp"
#include "singfit/series.hpp"

namespace singfit {

/// Default multi-start seeds. The NLF grid spans the plausible exponent
/// and critical-time ranges; r0 and p0 come from the data itself.
struct MultiStartGrid {
    std::vector<double> betas = {0.05, 0.1, 0.2, 0.4, 0.7};
    std::vector<double> tc_offsets = {1.0, 3.0, 10.0, 30.0, 100.0};  // years past window end
    std::vector<double> ap_values = {0.05, 0.1, 0.2, 0.4};
};

struct FitConfig {
    ModelSpec model;
    std::optional<std::pair<int, int>> window;   // inclusive [from, to] years
    std::map<std::string, double> frozen;        // e.g. {"p0", 0.0}
    std::optional<ParameterSet> initial;         // explicit start; otherwise the grid
    MultiStartGrid grid;
    double stop_rel_chi2 = 1e-3;                 // relative chi^2 change, i.e. 1e-1 %
    std::optional<double> extended_stop;         // e.g. 1e-5 for profiling runs
    int max_iter = 500;
};

struct FitResult {
    ParameterSet params;
    std::vector<std::string> free_names;
    std::vector<double> sigma;        // per free parameter, natural units
    Matrix covariance;                // free parameters, natural units
    double chi = 0.0;                 // sqrt(sum residual^2 / N), unweighted
    std::vector<double> chi2_trace;   // chi^2 after each accepted step
    bool converged = false;
    int n_points = 0;
    int n_free = 0;
};

class no_convergence_error : public std::runtime_error {
public:
    no_convergence_error(const std::string& what, FitResult best)
        : std::runtime_error(what), best_(std::move(best)) {}
    const FitResult& best() const { return best_; }

private:
    FitResult best_;
};

struct ProfileIterate {
    int iter = 0;
    double beta = 0.0;
    double t_c = 0.0;
    double beta_times_span = 0.0;  // beta * (t_c - t0)
    double a_p = 0.0;
    double chi2 = 0.0;
};

namespace detail_fit {

constexpr double kResidualClamp = 1e100;
constexpr double kChi2Floor = 1e-20;
constexpr double kLambdaMax = 1e12;

enum class Channel { LogPrice, Price, Rate };

struct ResidualPoint {
    double t;
    double target;
    Channel channel;
};

/// Maps between the internal optimizer coordinates and natural
/// parameters. Positive parameters live in log space; t_c is optimized
/// as log(t_c - anchor) so trial singularities stay past the data.
struct ParamMap {
    enum class Kind { Linear, Log, LogShift };
    struct Entry {
        std::string name;
        Kind kind;
        double shift = 0.0;
    };

    ModelFamily family = ModelFamily::Cagan;
    double t0 = 0.0, dt = 1.0;
    std::vector<Entry> free;
    std::map<std::string, double> fixed;

    static double to_natural(const Entry& e, double x) {
        switch (e.kind) {
            case Kind::Linear: return x;
            case Kind::Log: return std::exp(x);
            case Kind::LogShift: return e.shift + std::exp(x);
        }
        return x;
    }

    static double to_internal(const Entry& e, double v) {
        switch (e.kind) {
            case Kind::Linear: return v;
            case Kind::Log: return std::log(v);
            case Kind::LogShift: return std::log(v - e.shift);
        }
        return v;
    }

    /// d(natural)/d(internal), used to convert covariances.
    static double jacobian_scale(const Entry& e, double x) {
        switch (e.kind) {
            case Kind::Linear: return 1.0;
            case Kind::Log:
            case Kind::LogShift: return std::exp(x);
        }
        return 1.0;
    }

    double natural(const std::string& name, const std::vector<double>& x) const {
        if (auto it = fixed.find(name); it != fixed.end()) return it->second;
        for (std::size_t i = 0; i < free.size(); ++i)
            if (free[i].name == name) return to_natural(free[i], x[i]);
        throw std::invalid_argument("parameter '" + name + "' not in model");
    }

    ParameterSet to_params(const std::vector<double>& x) const {
        const double p0 = natural("p0", x);
        const double r0 = natural("r0", x);
        switch (family) {
            case ModelFamily::Cagan:
                return ParameterSet::cagan(t0, dt, p0, r0);
            case ModelFamily::LinearFeedback:
                return ParameterSet::linear_feedback(t0, dt, p0, r0, natural("a_p", x));
            case ModelFamily::NonlinearFeedback:
            case ModelFamily::StzDirect:
                return ParameterSet::nlf_with_tc(t0, dt, p0, r0, natural("beta", x),
                                                 natural("t_c", x));
        }
        throw std::invalid_argument("unknown model family");
    }
};

inline double predict(const ModelSpec& model, const ParameterSet& ps, const ResidualPoint& pt) {
    switch (pt.channel) {
        case Channel::LogPrice: return model_log_price(model.family, ps, pt.t);
        case Channel::Price:
            // STZ* reads the diverging log-price formula as the raw price
            return model.family == ModelFamily::StzDirect
                       ? nlf_log_price(ps, pt.t)
                       : std::exp(model_log_price(model.family, ps, pt.t));
        case Channel::Rate: return model_rate(model.family, ps, pt.t);
    }
    return 0.0;
}

/// Residual vector (model - data); evaluation failures become a large
/// finite penalty so the optimizer can retreat.
inline void residuals(const ModelSpec& model, const ParamMap& pmap,
                      const std::vector<ResidualPoint>& pts, const std::vector<double>& x,
                      std::vector<double>& out) {
    out.resize(pts.size());
    ParameterSet ps;
    bool ok = true;
    try {
        ps = pmap.to_params(x);
    } catch (const std::exception&) {
        ok = false;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double r = kResidualClamp;
        if (ok) {
            try {
                r = predict(model, ps, pts[i]) - pts[i].target;
                if (!std::isfinite(r)) r = kResidualClamp;
            } catch (const std::exception&) {
                r = kResidualClamp;
            }
        }
        out[i] = r;
    }
}

inline double chi2_of(const std::vector<double>& f) {
    double s = 0.0;
    for (double v : f) s += v * v;
    return s;
}

inline Matrix jacobian(const ModelSpec& model, const ParamMap& pmap,
                       const std::vector<ResidualPoint>& pts, const std::vector<double>& x) {
    Matrix j(pts.size(), x.size());
    std::vector<double> xp = x, fplus, fminus;
    for (std::size_t c = 0; c < x.size(); ++c) {
        const double h = 1e-6 * (1.0 + std::abs(x[c]));
        xp[c] = x[c] + h;
        residuals(model, pmap, pts, xp, fplus);
        xp[c] = x[c] - h;
        residuals(model, pmap, pts, xp, fminus);
        xp[c] = x[c];
        for (std::size_t r = 0; r < pts.size(); ++r) j(r, c) = (fplus[r] - fminus[r]) / (2.0 * h);
    }
    return j;
}

struct LmRun {
    std::vector<double> x;
    double chi2 = 0.0;
    std::vector<double> chi2_trace;
    std::vector<std::vector<double>> accepted_x;  // including the start
    bool converged = false;
};

/// Plain Levenberg-Marquardt with multiplicative damping. Accepted steps
/// never increase chi^2; lambda shrinks on acceptance and grows tenfold
/// on rejection.
inline LmRun levenberg_marquardt(const ModelSpec& model, const ParamMap& pmap,
                                 const std::vector<ResidualPoint>& pts, std::vector<double> x0,
                                 double stop_rel_chi2, int max_iter) {
    LmRun run;
    run.x = std::move(x0);
    const std::size_t n = run.x.size();
    std::vector<double> f, ftry;
    residuals(model, pmap, pts, run.x, f);
    run.chi2 = chi2_of(f);
    run.chi2_trace.push_back(run.chi2);
    run.accepted_x.push_back(run.x);

    double lambda = 1e-3;
    for (int iter = 0; iter < max_iter; ++iter) {
        if (run.chi2 < kChi2Floor) {
            run.converged = true;
            break;
        }
        const Matrix j = jacobian(model, pmap, pts, run.x);
        std::vector<double> g(n, 0.0);
        Matrix a(n, n);
        for (std::size_t r = 0; r < pts.size(); ++r)
            for (std::size_t c = 0; c < n; ++c) {
                g[c] += j(r, c) * f[r];
                for (std::size_t c2 = c; c2 < n; ++c2) a(c, c2) += j(r, c) * j(r, c2);
            }
        for (std::size_t c = 0; c < n; ++c)
            for (std::size_t c2 = 0; c2 < c; ++c2) a(c, c2) = a(c2, c);

        double gmax = 0.0;
        for (double v : g) gmax = std::max(gmax, std::abs(v));
        if (gmax < 1e-12 * std::max(1.0, run.chi2)) {
            run.converged = true;
            break;
        }

        bool stepped = false;
        while (lambda <= kLambdaMax) {
            Matrix damped = a;
            for (std::size_t c = 0; c < n; ++c)
                damped(c, c) += lambda * std::max(a(c, c), 1e-30);
            std::vector<double> delta;
            try {
                std::vector<double> rhs(n);
                for (std::size_t c = 0; c < n; ++c) rhs[c] = -g[c];
                delta = solve(damped, rhs);
            } catch (const std::exception&) {
                lambda *= 10.0;
                continue;
            }
            std::vector<double> xtry = run.x;
            for (std::size_t c = 0; c < n; ++c) xtry[c] += delta[c];
            residuals(model, pmap, pts, xtry, ftry);
            const double chi2_try = chi2_of(ftry);
            if (std::isfinite(chi2_try) && chi2_try < run.chi2) {
                const double rel = (run.chi2 - chi2_try) / run.chi2;
                run.x = std::move(xtry);
                f = ftry;
                run.chi2 = chi2_try;
                run.chi2_trace.push_back(run.chi2);
                run.accepted_x.push_back(run.x);
                lambda = std::max(lambda / 10.0, 1e-12);
                stepped = true;
                if (rel < stop_rel_chi2) run.converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped) {
            // no direction improves: stationary up to damping limits
            run.converged = true;
            break;
        }
        if (run.converged) break;
    }
    return run;
}

struct FitProblem {
    ModelSpec model;
    ParamMap pmap;
    std::vector<ResidualPoint> pts;
    int anchor_year = 0;   // last data year inside the window
    double r0_est = 0.0;   // first GRI observation
    double p0_est = 0.0;   // first log price (raw price for STZ*)
};

inline FitProblem build_problem(const ObservationSeries& data, const FitConfig& cfg) {
    cfg.model.validate();
    ObservationSeries s = data;
    if (cfg.window) s = window(s, cfg.window->first, cfg.window->second);
    s.validate();

    const Objective obj = cfg.model.objective;
    if (obj == Objective::LogCpi &&
        !(s.kind == SeriesKind::LogPrice || s.kind == SeriesKind::PriceIndex))
        throw std::invalid_argument("log-CPI objective needs a price or log-price series");
    if ((obj == Objective::RawCpi || obj == Objective::JointGriLogCpi) &&
        s.kind != SeriesKind::PriceIndex)
        throw std::invalid_argument("this objective needs a price series");
    if (s.size() < 2) throw std::invalid_argument("fit needs at least two points");

    FitProblem prob;
    prob.model = cfg.model;
    prob.anchor_year = s.last_year();

    const ObservationSeries logp =
        s.kind == SeriesKind::LogPrice ? s : log_transform(s);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double t = static_cast<double>(s.year_of(i));
        switch (obj) {
            case Objective::LogCpi:
                prob.pts.push_back({t, logp.values[i], Channel::LogPrice});
                break;
            case Objective::RawCpi:
                prob.pts.push_back({t, s.values[i], Channel::Price});
                break;
            case Objective::JointGriLogCpi:
                prob.pts.push_back({t, logp.values[i], Channel::LogPrice});
                break;
        }
    }
    if (obj == Objective::JointGriLogCpi) {
        // GRI residuals, unit weights. Observed rates are labeled by the
        // interval end year but the one-period log return measures r at the
        // half step, so the model rate is evaluated at t - dt/2.
        for (std::size_t i = 0; i + 1 < logp.size(); ++i) {
            const double t = static_cast<double>(logp.year_of(i + 1)) - 0.5 * s.dt;
            prob.pts.push_back({t, logp.values[i + 1] - logp.values[i], Channel::Rate});
        }
    }

    prob.r0_est = logp.values.size() >= 2 ? logp.values[1] - logp.values[0] : 0.0;
    prob.p0_est = cfg.model.family == ModelFamily::StzDirect ? s.values.front()
                                                             : logp.values.front();

    // parameter map: free = family parameters minus frozen ones
    ParamMap& pm = prob.pmap;
    pm.family = cfg.model.family;
    pm.t0 = static_cast<double>(s.start_year);
    pm.dt = s.dt;
    pm.fixed = cfg.frozen;
    const bool positive_r0 = cfg.model.family != ModelFamily::Cagan;
    std::vector<ParamMap::Entry> all;
    all.push_back({"p0", ParamMap::Kind::Linear, 0.0});
    all.push_back({"r0", positive_r0 ? ParamMap::Kind::Log : ParamMap::Kind::Linear, 0.0});
    if (cfg.model.family == ModelFamily::LinearFeedback)
        all.push_back({"a_p", ParamMap::Kind::Log, 0.0});
    if (cfg.model.family == ModelFamily::NonlinearFeedback ||
        cfg.model.family == ModelFamily::StzDirect) {
        all.push_back({"beta", ParamMap::Kind::Log, 0.0});
        all.push_back({"t_c", ParamMap::Kind::LogShift, static_cast<double>(prob.anchor_year)});
    }
    for (const auto& name : cfg.frozen)
        if (std::none_of(all.begin(), all.end(),
                         [&](const ParamMap::Entry& e) { return e.name == name.first; }))
            throw std::invalid_argument("cannot freeze unknown parameter '" + name.first + "'");
    for (const auto& e : all)
        if (!cfg.frozen.count(e.name)) pm.free.push_back(e);

    if (prob.pts.size() < pm.free.size() + 1)
        throw std::invalid_argument("insufficient points: " + std::to_string(prob.pts.size()) +
                                    " residuals for " + std::to_string(pm.free.size()) +
                                    " free parameters");
    return prob;
}

/// Starting points in internal coordinates, deterministic order.
inline std::vector<std::vector<double>> starting_points(const FitProblem& prob,
                                                        const FitConfig& cfg) {
    const ParamMap& pm = prob.pmap;
    auto internal_of = [&](const std::map<std::string, double>& natural) {
        std::vector<double> x;
        x.reserve(pm.free.size());
        for (const auto& e : pm.free) {
            double v = natural.at(e.name);
            if (e.kind == ParamMap::Kind::Log) v = std::max(v, 1e-6);
            if (e.kind == ParamMap::Kind::LogShift) v = std::max(v, e.shift + 0.5);
            x.push_back(ParamMap::to_internal(e, v));
        }
        return x;
    };

    std::vector<std::vector<double>> starts;
    if (cfg.initial) {
        const ParameterSet& ps = *cfg.initial;
        std::map<std::string, double> nat{{"p0", ps.p0}, {"r0", ps.r0}};
        if (pm.family == ModelFamily::LinearFeedback) nat["a_p"] = ps.a_p();
        if (pm.family == ModelFamily::NonlinearFeedback ||
            pm.family == ModelFamily::StzDirect) {
            nat["beta"] = ps.beta;
            nat["t_c"] = ps.has_singularity() ? ps.t_c() : prob.anchor_year + 10.0;
        }
        starts.push_back(internal_of(nat));
        return starts;
    }

    std::map<std::string, double> base{{"p0", prob.p0_est}, {"r0", prob.r0_est}};
    switch (pm.family) {
        case ModelFamily::Cagan:
            starts.push_back(internal_of(base));
            break;
        case ModelFamily::LinearFeedback:
            for (double ap : cfg.grid.ap_values) {
                auto nat = base;
                nat["a_p"] = ap;
                starts.push_back(internal_of(nat));
            }
            break;
        case ModelFamily::NonlinearFeedback:
        case ModelFamily::StzDirect:
            for (double beta : cfg.grid.betas)
                for (double off : cfg.grid.tc_offsets) {
                    auto nat = base;
                    nat["beta"] = beta;
                    nat["t_c"] = prob.anchor_year + off;
                    starts.push_back(internal_of(nat));
                }
            break;
    }
    return starts;
}

inline FitResult finalize(const FitProblem& prob, const LmRun& run) {
    const ParamMap& pm = prob.pmap;
    const std::size_t k = pm.free.size();
    const std::size_t n = prob.pts.size();

    FitResult res;
    res.params = pm.to_params(run.x);
    for (const auto& e : pm.free) res.free_names.push_back(e.name);
    res.chi = std::sqrt(run.chi2 / static_cast<double>(n));
    res.chi2_trace = run.chi2_trace;
    res.converged = run.converged;
    res.n_points = static_cast<int>(n);
    res.n_free = static_cast<int>(k);

    // covariance = (J^T J)^-1 scaled by chi^2/(N-k), mapped to natural units
    res.covariance = Matrix(k, k);
    res.sigma.assign(k, std::numeric_limits<double>::quiet_NaN());
    if (n > k) {
        const Matrix j = jacobian(prob.model, pm, prob.pts, run.x);
        Matrix a(k, k);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < k; ++c)
                for (std::size_t c2 = 0; c2 < k; ++c2) a(c, c2) += j(r, c) * j(r, c2);
        try {
            Matrix cov = inverse(a);
            const double scale = run.chi2 / static_cast<double>(n - k);
            for (std::size_t c = 0; c < k; ++c) {
                const double dc = ParamMap::jacobian_scale(pm.free[c], run.x[c]);
                for (std::size_t c2 = 0; c2 < k; ++c2) {
                    const double dc2 = ParamMap::jacobian_scale(pm.free[c2], run.x[c2]);
                    res.covariance(c, c2) = cov(c, c2) * scale * dc * dc2;
                }
            }
            for (std::size_t c = 0; c < k; ++c)
                res.sigma[c] = std::sqrt(std::max(res.covariance(c, c), 0.0));
        } catch (const std::exception&) {
            for (auto& v : res.covariance.data) v = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return res;
}

}  // namespace detail_fit

/// Multi-start Levenberg-Marquardt fit of a model curve to a series.
inline FitResult fit(const ObservationSeries& data, const FitConfig& cfg) {
    const detail_fit::FitProblem prob = detail_fit::build_problem(data, cfg);
    const auto starts = detail_fit::starting_points(prob, cfg);

    std::optional<detail_fit::LmRun> best;
    for (const auto& x0 : starts) {
        detail_fit::LmRun run = detail_fit::levenberg_marquardt(
            prob.model, prob.pmap, prob.pts, x0, cfg.stop_rel_chi2, cfg.max_iter);
        if (!best || run.chi2 < best->chi2) best = std::move(run);
    }
    FitResult res = detail_fit::finalize(prob, *best);
    if (!std::isfinite(best->chi2) || best->chi2 >= detail_fit::kResidualClamp) {
        res.converged = false;
        throw no_convergence_error("all starts diverged or hit a singularity in the window",
                                   res);
    }
    return res;
}

/// Run the minimization past the standard stopping point (down to the
/// extended tolerance) and record the (beta, t_c) path of accepted steps.
inline std::vector<ProfileIterate> profile_beta_tc(const ObservationSeries& data,
                                                   const FitConfig& cfg) {
    if (cfg.model.family != ModelFamily::NonlinearFeedback)
        throw std::invalid_argument("profile_beta_tc requires the NLF family");
    const detail_fit::FitProblem prob = detail_fit::build_problem(data, cfg);
    const auto starts = detail_fit::starting_points(prob, cfg);
    const double tol = cfg.extended_stop.value_or(1e-5);

    // pick the start with the lowest initial chi^2, then run one long descent
    std::vector<double> f;
    std::size_t best_start = 0;
    double best_chi2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < starts.size(); ++i) {
        detail_fit::residuals(prob.model, prob.pmap, prob.pts, starts[i], f);
        const double c2 = detail_fit::chi2_of(f);
        if (c2 < best_chi2) {
            best_chi2 = c2;
            best_start = i;
        }
    }
    detail_fit::LmRun run = detail_fit::levenberg_marquardt(
        prob.model, prob.pmap, prob.pts, starts[best_start], tol, cfg.max_iter);

    std::vector<ProfileIterate> path;
    path.reserve(run.accepted_x.size());
    for (std::size_t i = 0; i < run.accepted_x.size(); ++i) {
        const ParameterSet ps = prob.pmap.to_params(run.accepted_x[i]);
        ProfileIterate it;
        it.iter = static_cast<int>(i);
        it.beta = ps.beta;
        it.t_c = ps.t_c();
        it.beta_times_span = ps.beta * (ps.t_c() - ps.t0);
        it.a_p = ps.a_p();
        it.chi2 = run.chi2_trace[i];
        path.push_back(it);
    }
    return path;
}

struct ComparisonEntry {
    FitConfig config;
    std::optional<FitResult> result;
    std::string error;
    bool failed = false;
};

/// Fit every config and rank by chi (failures sort last, batch never aborts).
inline std::vector<ComparisonEntry> compare_models(const ObservationSeries& data,
                                                   const std::vector<FitConfig>& cfgs) {
    if (cfgs.empty()) throw std::invalid_argument("compare_models needs at least one config");
    std::vector<ComparisonEntry> entries;
    entries.reserve(cfgs.size());
    for (const auto& cfg : cfgs) {
        ComparisonEntry e;
        e.config = cfg;
        try {
            e.result = fit(data, cfg);
        } catch (const std::exception& ex) {
            e.failed = true;
            e.error = ex.what();
        }
        entries.push_back(std::move(e));
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const ComparisonEntry& a, const ComparisonEntry& b) {
                         if (a.failed != b.failed) return !a.failed;
                         if (a.failed) return false;
                         if (a.result->chi != b.result->chi) return a.result->chi < b.result->chi;
                         return a.result->n_free < b.result->n_free;
                     });
    return entries;
}

inline void to_json(nlohmann::json& j, const FitResult& r) {
    nlohmann::json cov = nlohmann::json::array();
    for (std::size_t i = 0; i < r.covariance.rows; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < r.covariance.cols; ++c) row.push_back(r.covariance(i, c));
        cov.push_back(row);
    }
    j = nlohmann::json{{"params", r.params},
                       {"free", r.free_names},
                       {"sigma", r.sigma},
                       {"covariance", cov},
                       {"chi", r.chi},
                       {"chi_definition", "r.m.s. residue, unweighted"},
                       {"chi2_trace", r.chi2_trace},
                       {"converged", r.converged},
                       {"n_points", r.n_points},
                       {"n_free", r.n_free}};
}

}  // namespace singfit
