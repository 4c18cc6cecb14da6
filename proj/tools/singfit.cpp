// singfit: fit hyperinflation CPI series to feedback models with a
// finite-time-singularity critical time, plus transforms and simulation.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "singfit/csv.hpp"
#include "singfit/fit.hpp"
#include "singfit/models.hpp"
#include "singfit/series.hpp"
#include "singfit/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace singfit;

namespace {

constexpr const char* kVersion = "singfit 1.0.0";
constexpr int kExitData = 2;
constexpr int kExitNoConvergence = 3;

SeriesKind parse_kind(const std::string& k) {
    if (k == "price") return SeriesKind::PriceIndex;
    if (k == "inflation") return SeriesKind::InflationPct;
    if (k == "logprice") return SeriesKind::LogPrice;
    if (k == "gri") return SeriesKind::Gri;
    throw std::invalid_argument("unknown series kind '" + k + "'");
}

ModelFamily parse_family(const std::string& m) {
    if (m == "cagan") return ModelFamily::Cagan;
    if (m == "lf") return ModelFamily::LinearFeedback;
    if (m == "nlf") return ModelFamily::NonlinearFeedback;
    if (m == "stz") return ModelFamily::StzDirect;
    throw std::invalid_argument("unknown model '" + m + "'");
}

Objective parse_objective(const std::string& o) {
    if (o == "logcpi") return Objective::LogCpi;
    if (o == "rawcpi") return Objective::RawCpi;
    if (o == "joint") return Objective::JointGriLogCpi;
    throw std::invalid_argument("unknown objective '" + o + "'");
}

std::pair<int, int> parse_year_range(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("expected FROM:TO, got '" + s + "'");
    return {std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))};
}

/// Atomic write: stream to a temp file in the same directory, then rename.
void write_file_atomic(const std::string& path, const std::string& content) {
    const fs::path target(path);
    const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
    {
        std::ofstream out(tmp);
        if (!out) throw data_error("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, target);
}

/// The run manifest lists every output; it is written last so a complete
/// manifest implies a complete run.
void write_manifest(const std::string& command, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, const json& config_echo) {
    if (outputs.empty()) return;
    json m;
    m["schema"] = 1;
    m["command"] = command;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["config"] = config_echo;
    m["version"] = kVersion;
    m["timestamp"] = static_cast<long long>(::time(nullptr));
    write_file_atomic(outputs.front() + ".manifest.json", m.dump(2) + "\n");
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw data_error("cannot open config " + path);
    return json::parse(in);
}

/// Config-file values apply only where the flag was not given on the CLI.
template <typename T>
void cfg_default(const CLI::App& app, const std::string& flag, const json& cfg,
                 const std::string& key, T& var) {
    if (app.count(flag) == 0 && cfg.contains(key)) var = cfg.at(key).get<T>();
}

std::uint64_t effective_seed(std::uint64_t seed) {
    if (const char* env = std::getenv("SINGFIT_SEED")) return std::stoull(env);
    return seed;
}

std::string series_csv_string(const ObservationSeries& s) {
    std::ostringstream out;
    write_series_csv(out, s);
    return out.str();
}

// ---------------------------------------------------------------- transform

int run_transform(const std::string& input, std::string kind, std::vector<std::string> ops,
                  const std::string& out_path, const json& config_echo) {
    ObservationSeries s = read_series_csv(input, parse_kind(kind));
    for (const std::string& op : ops) {
        std::vector<std::string> parts;
        std::stringstream ss(op);
        for (std::string tok; std::getline(ss, tok, ':');) parts.push_back(tok);
        const std::string& name = parts[0];
        if (name == "to-cpi") {
            const double base = parts.size() > 1 ? std::stod(parts[1]) : 1.0;
            s = inflation_to_cpi(s, base);
        } else if (name == "normalize") {
            if (parts.size() < 2) throw std::invalid_argument("normalize needs a year");
            s = normalize(s, std::stoi(parts[1]));
        } else if (name == "log") {
            s = log_transform(s);
        } else if (name == "gri") {
            s = cpi_to_gri(s);
        } else if (name == "window") {
            if (parts.size() < 3) throw std::invalid_argument("window needs FROM:TO");
            s = window(s, std::stoi(parts[1]), std::stoi(parts[2]));
        } else {
            throw std::invalid_argument("unknown op '" + name + "'");
        }
    }
    write_file_atomic(out_path, series_csv_string(s));
    write_manifest("transform", {input}, {out_path}, config_echo);
    return 0;
}

// ---------------------------------------------------------------------- fit

std::string curves_csv(const ObservationSeries& data, const ModelSpec& model,
                       const ParameterSet& ps, double horizon) {
    const auto logp = data.kind == SeriesKind::LogPrice ? data : log_transform(data);
    std::ostringstream out;
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    out << "year,data,model,residual\n";
    auto model_value = [&](double t) {
        return model.objective == Objective::RawCpi && model.family == ModelFamily::StzDirect
                   ? std::log(nlf_log_price(ps, t))  // STZ* raw-price curve, in log space
                   : model_log_price(model.family, ps, t);
    };
    for (std::size_t i = 0; i < logp.size(); ++i) {
        const double t = static_cast<double>(logp.year_of(i));
        const double m = model_value(t);
        out << logp.year_of(i) << ',' << logp.values[i] << ',' << m << ','
            << (m - logp.values[i]) << '\n';
    }
    double t_end = data.last_year() + horizon;
    const bool has_tc = ps.has_singularity();
    if (has_tc) t_end = std::min(t_end, ps.t_c() - 0.01 * ps.dt);
    for (double t = data.start_year; t <= t_end + 1e-9; t += 0.1)
        out << t << ",," << model_value(t) << ",\n";
    if (has_tc) out << ps.t_c() << ",,,\n";  // vertical-line marker for t_c
    return out.str();
}

int run_fit(const std::string& input, const std::string& kind, const FitConfig& cfg,
            const std::string& report_path, const std::string& curves_path, double horizon,
            const json& config_echo) {
    const ObservationSeries data = read_series_csv(input, parse_kind(kind));

    json report;
    report["schema"] = 1;
    report["model"] = to_string(cfg.model.family);
    report["objective"] = to_string(cfg.model.objective);
    if (cfg.window) report["window"] = {cfg.window->first, cfg.window->second};
    report["frozen"] = cfg.frozen;

    std::optional<FitResult> result;
    int exit_code = 0;
    try {
        result = fit(data, cfg);
        if (!result->converged) exit_code = kExitNoConvergence;
    } catch (const no_convergence_error& e) {
        result = e.best();
        report["error"] = e.what();
        exit_code = kExitNoConvergence;
    }
    report["result"] = *result;

    std::vector<std::string> outputs{report_path};
    write_file_atomic(report_path, report.dump(2) + "\n");
    if (!curves_path.empty() && exit_code == 0) {
        ObservationSeries shown = data;
        if (cfg.window) shown = window(shown, cfg.window->first, cfg.window->second);
        write_file_atomic(curves_path, curves_csv(shown, cfg.model, result->params, horizon));
        outputs.push_back(curves_path);
    }
    write_manifest("fit", {input}, outputs, config_echo);
    return exit_code;
}

// ------------------------------------------------------------------ profile

int run_profile(const std::string& input, const std::string& kind, const FitConfig& cfg,
                const std::string& out_path, const json& config_echo) {
    const ObservationSeries data = read_series_csv(input, parse_kind(kind));
    const auto path = profile_beta_tc(data, cfg);
    std::ostringstream out;
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    out << "iter,beta,t_c,beta_times_span,a_p,chi2\n";
    for (const auto& it : path)
        out << it.iter << ',' << it.beta << ',' << it.t_c << ',' << it.beta_times_span << ','
            << it.a_p << ',' << it.chi2 << '\n';
    write_file_atomic(out_path, out.str());
    write_manifest("profile", {input}, {out_path}, config_echo);
    return 0;
}

// ----------------------------------------------------------------- simulate

int run_simulate(const std::string& family, const ParameterSet& ps, int from_year, int to_year,
                 double noise, std::uint64_t seed, const std::string& out_path,
                 const json& config_echo) {
    const auto s = synthesize(ps, parse_family(family), from_year, to_year, noise, seed);
    write_file_atomic(out_path, series_csv_string(s));
    write_manifest("simulate", {}, {out_path}, config_echo);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hyperinflation model fitting: CPI transforms, Levenberg-Marquardt fits of "
                 "Cagan/LF/NLF curves, critical-time profiles, and synthetic series."};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // transform -------------------------------------------------------------
    auto* t = app.add_subcommand("transform", "Apply series transforms to a CSV");
    std::string t_input, t_kind = "price", t_out = "out.csv", t_config;
    std::vector<std::string> t_ops;
    t->add_option("input", t_input, "input CSV (year,value)")->required();
    t->add_option("--kind", t_kind, "input kind: price|inflation|logprice|gri");
    t->add_option("--op", t_ops,
                  "pipeline step, in order: to-cpi[:BASE] normalize:YEAR log gri window:FROM:TO");
    t->add_option("--out", t_out, "output CSV");
    t->add_option("--config", t_config, "JSON config file (CLI flags win)");

    // fit -------------------------------------------------------------------
    auto* f = app.add_subcommand("fit", "Fit a model to a series");
    std::string f_input, f_kind = "price", f_model = "nlf", f_objective = "logcpi";
    std::string f_window, f_report = "report.json", f_curves, f_config;
    std::vector<std::string> f_freeze;
    double f_tol = 1e-3, f_horizon = 10.0;
    double f_ext_tol = 0.0;
    int f_max_iter = 500;
    f->add_option("input", f_input, "input CSV")->required();
    f->add_option("--kind", f_kind, "input kind: price|inflation|logprice|gri");
    f->add_option("--model", f_model, "cagan|lf|nlf|stz");
    f->add_option("--objective", f_objective, "logcpi|rawcpi|joint");
    f->add_option("--window", f_window, "fit window FROM:TO (years, inclusive)");
    f->add_option("--freeze", f_freeze, "freeze a parameter, e.g. p0=0");
    f->add_option("--tol", f_tol, "relative chi^2 stopping threshold");
    f->add_option("--extended-tol", f_ext_tol, "extended stopping threshold (0 = unused)");
    f->add_option("--max-iter", f_max_iter, "iteration cap");
    f->add_option("--report", f_report, "output report JSON");
    f->add_option("--curves", f_curves, "output curves CSV (data + dense model grid)");
    f->add_option("--horizon", f_horizon, "years past the data to extend the model grid");
    f->add_option("--config", f_config, "JSON config file (CLI flags win)");

    // profile ---------------------------------------------------------------
    auto* p = app.add_subcommand("profile", "Record the (beta, t_c) iteration path of an NLF fit");
    std::string p_input, p_kind = "price", p_window, p_out = "profile.csv", p_config;
    std::vector<std::string> p_freeze;
    double p_ext_tol = 1e-5;
    int p_max_iter = 500;
    p->add_option("input", p_input, "input CSV")->required();
    p->add_option("--kind", p_kind, "input kind");
    p->add_option("--window", p_window, "fit window FROM:TO");
    p->add_option("--freeze", p_freeze, "freeze a parameter, e.g. p0=0");
    p->add_option("--extended-tol", p_ext_tol, "extended stopping threshold");
    p->add_option("--max-iter", p_max_iter, "iteration cap");
    p->add_option("--out", p_out, "output profile CSV");
    p->add_option("--config", p_config, "JSON config file (CLI flags win)");

    // simulate --------------------------------------------------------------
    auto* s = app.add_subcommand("simulate", "Generate a synthetic price series");
    std::string s_family = "nlf", s_years = "1969:1990", s_out = "synthetic.csv", s_config;
    double s_t0 = 1969, s_dt = 1, s_p0 = 0, s_r0 = 0.1, s_ap = 0, s_tc = 0, s_beta = 0,
           s_noise = 0;
    std::uint64_t s_seed = 0;
    s->add_option("--family", s_family, "cagan|lf|nlf");
    s->add_option("--t0", s_t0, "model origin year");
    s->add_option("--dt", s_dt, "period in years");
    s->add_option("--p0", s_p0, "initial log price");
    s->add_option("--r0", s_r0, "initial GRI");
    s->add_option("--a-p", s_ap, "feedback strength (lf/nlf)");
    s->add_option("--tc", s_tc, "critical time (nlf alternative to --a-p)");
    s->add_option("--beta", s_beta, "power-law exponent (nlf)");
    s->add_option("--years", s_years, "sampled range FROM:TO");
    s->add_option("--noise", s_noise, "log-price noise sigma");
    s->add_option("--seed", s_seed, "RNG seed (SINGFIT_SEED env overrides)");
    s->add_option("--out", s_out, "output CSV");
    s->add_option("--config", s_config, "JSON config file (CLI flags win)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (t->parsed()) {
            const json cfg = load_config(t_config);
            cfg_default(*t, "--kind", cfg, "kind", t_kind);
            cfg_default(*t, "--op", cfg, "op", t_ops);
            cfg_default(*t, "--out", cfg, "out", t_out);
            return run_transform(t_input, t_kind, t_ops, t_out, cfg);
        }
        if (f->parsed()) {
            const json cfg = load_config(f_config);
            cfg_default(*f, "--kind", cfg, "kind", f_kind);
            cfg_default(*f, "--model", cfg, "model", f_model);
            cfg_default(*f, "--objective", cfg, "objective", f_objective);
            cfg_default(*f, "--window", cfg, "window", f_window);
            cfg_default(*f, "--freeze", cfg, "freeze", f_freeze);
            cfg_default(*f, "--tol", cfg, "tol", f_tol);
            cfg_default(*f, "--extended-tol", cfg, "extended_tol", f_ext_tol);
            cfg_default(*f, "--max-iter", cfg, "max_iter", f_max_iter);
            cfg_default(*f, "--report", cfg, "report", f_report);
            cfg_default(*f, "--curves", cfg, "curves", f_curves);
            cfg_default(*f, "--horizon", cfg, "horizon", f_horizon);
            FitConfig fc;
            fc.model = {parse_family(f_model), parse_objective(f_objective)};
            if (!f_window.empty()) fc.window = parse_year_range(f_window);
            for (const auto& fr : f_freeze) {
                const auto eq = fr.find('=');
                if (eq == std::string::npos)
                    throw std::invalid_argument("--freeze expects name=value");
                fc.frozen[fr.substr(0, eq)] = std::stod(fr.substr(eq + 1));
            }
            fc.stop_rel_chi2 = f_tol;
            if (f_ext_tol > 0.0) {
                fc.extended_stop = f_ext_tol;
                fc.stop_rel_chi2 = f_ext_tol;
            }
            fc.max_iter = f_max_iter;
            return run_fit(f_input, f_kind, fc, f_report, f_curves, f_horizon, cfg);
        }
        if (p->parsed()) {
            const json cfg = load_config(p_config);
            cfg_default(*p, "--kind", cfg, "kind", p_kind);
            cfg_default(*p, "--window", cfg, "window", p_window);
            cfg_default(*p, "--freeze", cfg, "freeze", p_freeze);
            cfg_default(*p, "--extended-tol", cfg, "extended_tol", p_ext_tol);
            cfg_default(*p, "--max-iter", cfg, "max_iter", p_max_iter);
            cfg_default(*p, "--out", cfg, "out", p_out);
            FitConfig fc;
            fc.model = {ModelFamily::NonlinearFeedback, Objective::LogCpi};
            if (!p_window.empty()) fc.window = parse_year_range(p_window);
            for (const auto& fr : p_freeze) {
                const auto eq = fr.find('=');
                if (eq == std::string::npos)
                    throw std::invalid_argument("--freeze expects name=value");
                fc.frozen[fr.substr(0, eq)] = std::stod(fr.substr(eq + 1));
            }
            fc.extended_stop = p_ext_tol;
            fc.max_iter = p_max_iter;
            return run_profile(p_input, p_kind, fc, p_out, cfg);
        }
        if (s->parsed()) {
            const json cfg = load_config(s_config);
            cfg_default(*s, "--family", cfg, "family", s_family);
            cfg_default(*s, "--t0", cfg, "t0", s_t0);
            cfg_default(*s, "--dt", cfg, "dt", s_dt);
            cfg_default(*s, "--p0", cfg, "p0", s_p0);
            cfg_default(*s, "--r0", cfg, "r0", s_r0);
            cfg_default(*s, "--a-p", cfg, "a_p", s_ap);
            cfg_default(*s, "--tc", cfg, "tc", s_tc);
            cfg_default(*s, "--beta", cfg, "beta", s_beta);
            cfg_default(*s, "--years", cfg, "years", s_years);
            cfg_default(*s, "--noise", cfg, "noise", s_noise);
            cfg_default(*s, "--out", cfg, "out", s_out);
            if (s->count("--seed") == 0 && cfg.contains("seed"))
                s_seed = cfg.at("seed").get<std::uint64_t>();
            const auto [from, to] = parse_year_range(s_years);
            ParameterSet ps;
            const ModelFamily fam = parse_family(s_family);
            if (fam == ModelFamily::Cagan) {
                ps = ParameterSet::cagan(s_t0, s_dt, s_p0, s_r0);
            } else if (fam == ModelFamily::LinearFeedback) {
                ps = ParameterSet::linear_feedback(s_t0, s_dt, s_p0, s_r0, s_ap);
            } else if (s_tc > 0.0) {
                ps = ParameterSet::nlf_with_tc(s_t0, s_dt, s_p0, s_r0, s_beta, s_tc);
            } else {
                ps = ParameterSet::nlf_with_ap(s_t0, s_dt, s_p0, s_r0, s_beta, s_ap);
            }
            return run_simulate(s_family, ps, from, to, s_noise, effective_seed(s_seed), s_out,
                                cfg);
        }
    } catch (const no_convergence_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNoConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return 0;
}
