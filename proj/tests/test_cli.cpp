#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kBin = SINGFIT_CLI_BIN;
const std::string kData = SINGFIT_DATA_DIR;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("singfit_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static inline int counter = 0;
};

int run(const std::string& args) {
    const int rc = std::system((kBin + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load_json(const std::string& path) { return json::parse(slurp(path)); }

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::vector<std::string>> rows;
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> row;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) row.push_back(cell);
        if (line.back() == ',') row.push_back("");
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

TEST_CASE("closed loop: simulate then fit recovers the critical time") {
    TempDir d;
    const std::string synth = d.file("synth.csv");
    REQUIRE(run("simulate --family nlf --t0 1969 --p0 0 --r0 0.165 --beta 0.383 --tc 1999.26"
                " --years 1969:1990 --out " + synth) == 0);

    const std::string report = d.file("report.json");
    REQUIRE(run("fit " + synth + " --kind price --model nlf --freeze p0=0 --report " + report) ==
            0);
    const json r = load_json(report);
    CHECK(r.at("schema") == 1);
    CHECK(r.at("model") == "nlf");
    CHECK(r.at("result").at("converged") == true);
    CHECK(std::abs(r.at("result").at("params").at("t_c").get<double>() - 1999.26) < 0.05);
    CHECK(std::abs(r.at("result").at("params").at("beta").get<double>() - 0.383) < 1e-3);
}

TEST_CASE("reports are byte-identical across repeated runs") {
    TempDir d;
    const std::string synth = d.file("synth.csv");
    REQUIRE(run("simulate --family lf --r0 0.101 --a-p 0.176 --years 1969:1985 --noise 0.02"
                " --seed 3 --out " + synth) == 0);
    const std::string r1 = d.file("r1.json"), r2 = d.file("r2.json");
    REQUIRE(run("fit " + synth + " --kind price --model lf --report " + r1) == 0);
    REQUIRE(run("fit " + synth + " --kind price --model lf --report " + r2) == 0);
    CHECK(slurp(r1) == slurp(r2));
    CHECK(load_json(r1).at("result").contains("sigma"));
}

TEST_CASE("simulate is seed-deterministic and SINGFIT_SEED overrides --seed") {
    TempDir d;
    const std::string a = d.file("a.csv"), b = d.file("b.csv"), c = d.file("c.csv");
    REQUIRE(run("simulate --family lf --r0 0.1 --a-p 0.176 --years 1969:1985 --noise 0.02"
                " --seed 42 --out " + a) == 0);
    REQUIRE(run("simulate --family lf --r0 0.1 --a-p 0.176 --years 1969:1985 --noise 0.02"
                " --seed 42 --out " + b) == 0);
    CHECK(slurp(a) == slurp(b));

    const int rc = std::system(("SINGFIT_SEED=42 " + kBin +
                                " simulate --family lf --r0 0.1 --a-p 0.176 --years 1969:1985"
                                " --noise 0.02 --seed 7 --out " + c + " >/dev/null 2>&1")
                                   .c_str());
    REQUIRE(WEXITSTATUS(rc) == 0);
    CHECK(slurp(c) == slurp(a));
}

TEST_CASE("transform pipeline turns the bundled inflation table into a windowed CPI") {
    TempDir d;
    const std::string out = d.file("nic.csv");
    REQUIRE(run("transform " + kData + "/nicaragua_imf2.csv --kind inflation"
                " --op to-cpi --op normalize:1980 --op window:1980:1997 --out " + out) == 0);
    const auto rows = read_csv(out);
    REQUIRE(rows.size() == 19);  // header + 18 years
    CHECK(rows[0] == std::vector<std::string>{"year", "value"});
    CHECK(rows[1][0] == "1980");
    CHECK(std::stod(rows[1][1]) == 1.0);
    CHECK(rows.back()[0] == "1997");

    // A GRI step on the same pipeline peaks at 1987 with ln(1 + 131.095).
    const std::string gri = d.file("gri.csv");
    REQUIRE(run("transform " + kData + "/nicaragua_imf2.csv --kind inflation"
                " --op to-cpi --op gri --out " + gri) == 0);
    double peak = 0.0;
    std::string peak_year;
    for (const auto& row : read_csv(gri)) {
        if (row[0] == "year") continue;
        if (std::stod(row[1]) > peak) peak = std::stod(row[1]), peak_year = row[0];
    }
    CHECK(peak_year == "1987");
    CHECK_THAT(peak, Catch::Matchers::WithinAbs(std::log1p(131.095), 1e-12));
}

TEST_CASE("every command writes a manifest listing its outputs") {
    TempDir d;
    const std::string out = d.file("s.csv");
    REQUIRE(run("simulate --family cagan --r0 0.1 --years 1980:1985 --out " + out) == 0);
    const json m = load_json(out + ".manifest.json");
    CHECK(m.at("schema") == 1);
    CHECK(m.at("command") == "simulate");
    CHECK(m.at("outputs") == json::array({out}));
    CHECK(m.contains("timestamp"));
}

TEST_CASE("malformed or mismatched input exits with code 2") {
    TempDir d;
    const std::string bad = d.file("bad.csv");
    std::ofstream(bad) << "year,value\n1980,1.0\n1982,2.0\n";  // gap in the years
    CHECK(run("fit " + bad + " --kind price --model lf") == 2);
    CHECK(run("transform " + bad + " --kind price --op log --out " + d.file("x.csv")) == 2);
    CHECK(run("fit " + d.file("missing.csv") + " --kind price") == 2);
    // wrong kind for the objective
    CHECK(run("fit " + kData + "/nicaragua_imf2.csv --kind inflation --model nlf") == 2);
    // unknown pipeline op
    const std::string ok = d.file("ok.csv");
    std::ofstream(ok) << "year,value\n1980,1.0\n1981,2.0\n";
    CHECK(run("transform " + ok + " --kind price --op frobnicate --out " + d.file("y.csv")) == 2);
}

TEST_CASE("a fit stopped by the iteration cap exits 3 but still writes the report") {
    TempDir d;
    const std::string synth = d.file("synth.csv");
    REQUIRE(run("simulate --family nlf --r0 0.165 --beta 0.383 --tc 1999.26 --years 1969:1990"
                " --noise 0.05 --seed 5 --out " + synth) == 0);
    const std::string report = d.file("report.json");
    CHECK(run("fit " + synth + " --kind price --model nlf --max-iter 1 --report " + report) == 3);
    const json r = load_json(report);
    CHECK(r.at("result").at("converged") == false);
    CHECK(r.at("result").at("chi2_trace").size() >= 1);
}

TEST_CASE("curves output covers the data, a dense grid, and a t_c marker") {
    TempDir d;
    const std::string synth = d.file("synth.csv");
    REQUIRE(run("simulate --family nlf --r0 0.165 --beta 0.383 --tc 1999.26 --years 1969:1990"
                " --out " + synth) == 0);
    const std::string report = d.file("report.json"), curves = d.file("curves.csv");
    REQUIRE(run("fit " + synth + " --kind price --model nlf --freeze p0=0 --report " + report +
                " --curves " + curves) == 0);
    const auto rows = read_csv(curves);
    REQUIRE(rows.size() > 22 + 1);
    CHECK(rows[0] == std::vector<std::string>{"year", "data", "model", "residual"});
    // data rows carry data and residual; grid rows leave them empty
    CHECK(rows[1][1] != "");
    CHECK(rows[1][3] != "");
    std::size_t grid_rows = 0;
    for (std::size_t i = 1; i + 1 < rows.size(); ++i)
        if (rows[i][1].empty()) ++grid_rows;
    CHECK(grid_rows > 100);
    // the marker row holds only the fitted critical time
    const auto& marker = rows.back();
    CHECK(marker[1].empty());
    CHECK(marker[2].empty());
    const double tc_fit = load_json(report).at("result").at("params").at("t_c").get<double>();
    CHECK_THAT(std::stod(marker[0]), Catch::Matchers::WithinAbs(tc_fit, 1e-9));
    // the grid never reaches the singularity
    CHECK(std::stod(rows[rows.size() - 2][0]) < tc_fit);
}

TEST_CASE("profile emits the (beta, t_c) descent path as CSV") {
    TempDir d;
    const std::string synth = d.file("synth.csv");
    REQUIRE(run("simulate --family nlf --r0 0.165 --beta 0.383 --tc 1999.26 --years 1969:1990"
                " --out " + synth) == 0);
    const std::string prof = d.file("prof.csv");
    REQUIRE(run("profile " + synth + " --kind price --freeze p0=0 --max-iter 80 --out " + prof) ==
            0);
    const auto rows = read_csv(prof);
    REQUIRE(rows.size() >= 3);
    CHECK(rows[0] ==
          std::vector<std::string>{"iter", "beta", "t_c", "beta_times_span", "a_p", "chi2"});
    CHECK(rows[1][0] == "0");
    CHECK(std::stod(rows.back()[5]) < std::stod(rows[1][5]));
    CHECK(std::stoi(rows.back()[0]) > std::stoi(rows[1][0]));
}

TEST_CASE("config file supplies defaults and CLI flags win") {
    TempDir d;
    const std::string synth = d.file("synth.csv");
    REQUIRE(run("simulate --family lf --r0 0.101 --a-p 0.176 --years 1969:1985 --out " + synth) ==
            0);
    const std::string cfg = d.file("cfg.json");
    std::ofstream(cfg) << R"({"model": "lf", "report": ")" << d.file("from_cfg.json") << R"("})";
    REQUIRE(run("fit " + synth + " --kind price --config " + cfg) == 0);
    CHECK(load_json(d.file("from_cfg.json")).at("model") == "lf");

    // explicit flags override the config file
    REQUIRE(run("fit " + synth + " --kind price --config " + cfg + " --report " +
                d.file("cli.json")) == 0);
    CHECK(fs::exists(d.file("cli.json")));
    CHECK(load_json(d.file("cli.json")).at("model") == "lf");
}

TEST_CASE("window-split workflow: fit a sub-range selected on the command line") {
    TempDir d;
    const std::string synth = d.file("synth.csv");
    REQUIRE(run("simulate --family nlf --r0 0.165 --beta 0.383 --tc 1999.26 --years 1969:1994"
                " --out " + synth) == 0);
    const std::string report = d.file("report.json");
    REQUIRE(run("fit " + synth + " --kind price --model nlf --freeze p0=0"
                " --window 1969:1990 --report " + report) == 0);
    const json r = load_json(report);
    CHECK(r.at("window") == json::array({1969, 1990}));
    CHECK(r.at("result").at("n_points") == 22);
    CHECK(std::abs(r.at("result").at("params").at("t_c").get<double>() - 1999.26) < 0.05);
}
