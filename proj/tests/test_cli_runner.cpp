#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "ifseq/cli/commands.hpp"

using namespace ifseq;
using namespace ifseq::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("ifseq_test_" + name)) {
        fs::remove_all(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

nlohmann::json small_ternary(const fs::path& out) {
    return {
        {"ifs", {{{"delta", "1/3"}, {"gamma", -1}}, {{"delta", "1/3"}, {"gamma", 1}}}},
        {"n_max", 3},
        {"quadrature_order", 256},
        {"sample_count", 64},
        {"grid_points", 21},
        {"output_dir", out.string()},
    };
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::stringstream ss(slurp(p));
    std::string line;
    while (std::getline(ss, line)) {
        REQUIRE(!line.empty());
        REQUIRE(line.back() == '\r');
        line.pop_back();
        std::vector<std::string> fields;
        std::stringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) {
            fields.push_back(f);
        }
        if (!line.empty() && line.back() == ',') {
            fields.emplace_back();
        }
        rows.push_back(fields);
    }
    return rows;
}

} // namespace

TEST_CASE("config parsing", "[cli_runner]") {
    const auto cfg = parse_config(small_ternary("o"));
    CHECK(cfg.maps.size() == 2);
    CHECK(cfg.maps[0].delta == 1.0 / 3.0);
    CHECK(cfg.n_max == 3);
    CHECK(cfg.solver.quadrature_order == 256);
    CHECK(cfg.solver.residual_tol == 1e-12);
    CHECK(cfg.fit_window == 4);
    CHECK(cfg.cache);
    CHECK(cfg.host_band == HostBand::Product);

    const auto pairs = parse_config({{"ifs", {{0.1, 1.0}, {0.8, -1.0}}}, {"n_max", 2}, {"host_band", "node_sum"}});
    CHECK(pairs.maps[0].gamma == -1.0);
    CHECK(pairs.host_band == HostBand::NodeSum);
}

TEST_CASE("a contraction ratio above one is a single error", "[cli_runner]") {
    auto doc = small_ternary("o");
    doc["ifs"][0]["delta"] = 1.2;
    try {
        parse_config(doc);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        REQUIRE(e.problems().size() == 1);
        CHECK(e.problems()[0].find("contract") != std::string::npos);
    }
}

TEST_CASE("all config problems are reported together", "[cli_runner]") {
    const nlohmann::json doc = {
        {"ifs", {{{"delta", 0.6}, {"gamma", -1}}, {{"delta", "x"}, {"gamma", 1}}}},
        {"quadrature_order", 0},
        {"residual_tol", -1.0},
        {"colour", "blue"},
        {"kernel", "fast"},
    };
    try {
        parse_config(doc);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        // unknown key, bad map, missing n_max, K, kernel, tolerance
        CHECK(e.problems().size() >= 6);
    }
    CHECK_THROWS_AS(parse_config(nlohmann::json::array()), ConfigError);
    CHECK_THROWS_AS(parse_config({{"ifs", {{0.6, -1}, {0.6, 1}}}, {"n_max", 1}}), ConfigError);
    CHECK_THROWS_AS(parse_config({{"ifs", {{0.3, -1}, {0.3, 1}}}, {"n_max", 40}}), ConfigError);
}

TEST_CASE("fingerprint follows the maps, K and tolerance only", "[cli_runner]") {
    const auto base = parse_config(small_ternary("a"));
    auto other_dir = small_ternary("b");
    other_dir["sample_count"] = 10;
    CHECK(fingerprint(base) == fingerprint(parse_config(other_dir)));
    for (const auto& [key, value] : {std::pair<std::string, nlohmann::json>{"quadrature_order", 512},
                                     std::pair<std::string, nlohmann::json>{"residual_tol", 1e-11}}) {
        auto d = small_ternary("a");
        d[key] = value;
        CHECK(fingerprint(parse_config(d)) != fingerprint(base));
    }
    auto moved = small_ternary("a");
    moved["ifs"][1]["gamma"] = 1.5;
    CHECK(fingerprint(parse_config(moved)) != fingerprint(base));
    CHECK(fingerprint(base).size() == 16);
}

TEST_CASE("solve writes one record per generation and reuses them", "[cli_runner]") {
    TempDir dir("solve");
    const auto cfg = parse_config(small_ternary(dir.path));
    std::ostringstream out;
    std::ostringstream err;
    REQUIRE(cmd_solve(cfg, out, err) == kSuccess);
    for (int n = 1; n <= 3; ++n) {
        const auto r = nlohmann::json::parse(slurp(record_path(dir.path, n)));
        CHECK(r["generation"] == n);
        CHECK(r["bands"].size() == std::size_t{1} << n);
        CHECK(r["fingerprint"] == fingerprint(cfg));
        for (double v : r["residuals"].get<std::vector<double>>()) {
            CHECK(v < 1e-12);
        }
    }
    CHECK(out.str().find("(cached)") == std::string::npos);

    // stored values come back bit for bit
    const auto fresh = obtain_generations(cfg, false);
    const auto solved = solve_generation(fresh[2].bands, warm_start(fresh[2].bands, fresh[1].solution), cfg.solver);
    CHECK(fresh[2].from_cache);
    CHECK(fresh[2].solution.lambdas == solved.lambdas);
    CHECK(fresh[2].solution.omegas == solved.omegas);
    CHECK(fresh[2].solution.Omegas == solved.Omegas);

    std::ostringstream again;
    REQUIRE(cmd_solve(cfg, again, err) == kSuccess);
    CHECK(again.str().find("iterations=0") != std::string::npos);
    for (int n = 1; n <= 3; ++n) {
        CHECK(again.str().find("n=" + std::to_string(n) + " ") != std::string::npos);
    }
    std::size_t cached = 0;
    for (std::size_t p = again.str().find("(cached)"); p != std::string::npos; p = again.str().find("(cached)", p + 1)) {
        ++cached;
    }
    CHECK(cached == 3);

    // a different K does not reuse the records
    auto k2 = small_ternary(dir.path);
    k2["quadrature_order"] = 300;
    const auto gens = obtain_generations(parse_config(k2), true);
    for (const auto& g : gens) {
        CHECK_FALSE(g.from_cache);
    }

    // no temporary files left behind
    for (const auto& e : fs::directory_iterator(dir.path)) {
        CHECK(e.path().string().find(".tmp") == std::string::npos);
    }
}

TEST_CASE("figures need stored solutions unless asked to solve", "[cli_runner]") {
    TempDir dir("missing");
    const auto cfg = parse_config(small_ternary(dir.path));
    std::ostringstream out;
    std::ostringstream err;
    CHECK(cmd_figures(cfg, "all", false, out, err) == kIoError);
    CHECK(err.str().find("generation 1") != std::string::npos);
    CHECK_FALSE(fs::exists(dir.path / "capacity_table.csv"));
    CHECK(cmd_figures(cfg, "nonsense", true, out, err) == kConfigError);
}

TEST_CASE("figures write every CSV with a header", "[cli_runner]") {
    TempDir dir("figures");
    const auto cfg = parse_config(small_ternary(dir.path));
    std::ostringstream out;
    std::ostringstream err;
    REQUIRE(cmd_figures(cfg, "all", true, out, err) == kSuccess);
    const std::map<std::string, std::vector<std::string>> headers = {
        {"residuals_before_after.csv", {"n", "gap", "residual_before", "residual_after"}},
        {"jacobian_decay.csv", {"n", "i", "m", "offset", "abs_derivative", "ratio_to_diagonal"}},
        {"lambda_vs_n.csv", {"n", "gap", "line", "parent", "lambda", "zeta"}},
        {"Omega_vs_n.csv", {"n", "gap", "line", "Omega"}},
        {"Omega_of_x.csv", {"n", "x", "Omega"}},
        {"gapmeasure_fit.csv", {"n", "gap", "Omega", "fitted", "a", "b", "c"}},
        {"potential_profile.csv", {"n", "x", "V"}},
        {"capacity_table.csv", {"n", "V_point", "V_mean", "V_stddev", "excluded", "fit_point", "fit_mean"}},
        {"capacity_fit.csv", {"path", "x", "n_first", "n_last", "a", "b", "c", "capacity"}},
    };
    for (const auto& [file, header] : headers) {
        INFO(file);
        const auto rows = read_csv(dir.path / file);
        REQUIRE(rows.size() > 1);
        CHECK(rows[0] == header);
        for (const auto& r : rows) {
            CHECK(r.size() == header.size());
        }
    }
    // jacobian at n = 3: 7 x 7 entries
    CHECK(read_csv(dir.path / "jacobian_decay.csv").size() == 50);
    // capacity table: one row per generation, values increasing
    const auto cap = read_csv(dir.path / "capacity_table.csv");
    REQUIRE(cap.size() == 4);
    CHECK(std::stod(cap[1][2]) < std::stod(cap[2][2]));
    CHECK(std::abs(std::stod(cap[1][2]) + std::log(std::sqrt(2.0) / 3.0)) < 1e-6);
    // lines: the central gap keeps line 0 throughout
    const auto lam = read_csv(dir.path / "lambda_vs_n.csv");
    for (const auto& r : lam) {
        if (r[0] == "3" && r[1] == "3") {
            CHECK(r[2] == "0");
            CHECK(r[3] == "1");
        }
    }
    // 17 significant digits
    const auto om = read_csv(dir.path / "Omega_of_x.csv");
    CHECK(om.back()[2].find('.') != std::string::npos);
}

TEST_CASE("asymmetric lambdas in the exported table stay below 1/10", "[cli_runner]") {
    TempDir dir("asym");
    const nlohmann::json doc = {{"ifs", nlohmann::json::array({nlohmann::json::array({"4/5", -1}), nlohmann::json::array({"1/10", 1})})}, {"n_max", 5}, {"quadrature_order", 512},
                                {"output_dir", dir.path.string()}};
    const auto cfg = parse_config(doc);
    std::ostringstream out;
    std::ostringstream err;
    REQUIRE(cmd_figures(cfg, "lambda,omega", true, out, err) == kSuccess);
    const auto rows = read_csv(dir.path / "lambda_vs_n.csv");
    CHECK(rows.size() == 1 + 1 + 3 + 7 + 15 + 31);
    for (std::size_t k = 1; k < rows.size(); ++k) {
        CHECK(std::abs(std::stod(rows[k][4])) < 0.1);
    }
    CHECK_FALSE(fs::exists(dir.path / "capacity_table.csv"));
}

TEST_CASE("integrated measure of a single band on the figure grid", "[cli_runner]") {
    auto cfg = parse_config(small_ternary("unused"));
    cfg.grid_points = 101;
    auto bands = BandSystem::from_intervals({{-1.0, 1.0}});
    auto sol = solve_generation(bands, GapVariables::midpoints(bands), cfg.solver);
    std::vector<Generation> gens;
    gens.push_back({bands, sol, false});
    const FigureBuilder fb(cfg, gens);
    std::stringstream ss(fb.omega_of_x().text());
    std::string line;
    std::getline(ss, line);
    int rows = 0;
    while (std::getline(ss, line)) {
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        double n = 0;
        double x = 0;
        double om = 0;
        fields >> n >> x >> om;
        CHECK(std::abs(om - (0.5 + std::asin(x) / std::numbers::pi)) < 1e-9);
        ++rows;
    }
    CHECK(rows == 101);
}

TEST_CASE("solver failures keep the generations already solved", "[cli_runner]") {
    TempDir dir("fail");
    auto doc = small_ternary(dir.path);
    doc["max_iterations"] = 0;
    const auto cfg = parse_config(doc);
    std::ostringstream out;
    std::ostringstream err;
    CHECK(cmd_solve(cfg, out, err) == kSolverFailure);
    CHECK(fs::exists(record_path(dir.path, 1)));
    CHECK(fs::exists(dir.path / "gen_2.failed.json"));
    CHECK_FALSE(fs::exists(record_path(dir.path, 2)));
    CHECK(err.str().find("solver failure") != std::string::npos);
}

TEST_CASE("capacity and potential commands", "[cli_runner]") {
    TempDir dir("capacity");
    auto doc = small_ternary(dir.path);
    doc["n_max"] = 4;
    const auto cfg = parse_config(doc);
    std::ostringstream out;
    std::ostringstream err;
    REQUIRE(cmd_capacity(cfg, true, out, err) == kSuccess);
    CHECK(out.str().find("C=0.44") != std::string::npos);

    std::ostringstream pout;
    REQUIRE(cmd_potential(cfg, "-1:1:5", 1, false, pout, err) == kSuccess);
    const auto rows = read_csv(dir.path / "potential.csv");
    REQUIRE(rows.size() == 6);
    CHECK(std::abs(std::stod(rows[1][3]) + std::log(std::sqrt(2.0) / 3.0)) < 1e-6);

    const fs::path pts = dir.path / "points.txt";
    std::ofstream(pts) << "# x, y\n0.5\n0,2\n\n";
    REQUIRE(cmd_potential(cfg, pts.string(), std::nullopt, false, pout, err) == kSuccess);
    CHECK(read_csv(dir.path / "potential.csv").size() == 3);

    CHECK(cmd_potential(cfg, "1:0:3", 1, false, pout, err) == kConfigError);
    CHECK(cmd_potential(cfg, "-1:1:5", 9, false, pout, err) == kConfigError);
}

TEST_CASE("CSV quoting", "[cli_runner]") {
    CsvTable t({"name", "value"});
    t.row(std::string("plain"), 0.1);
    t.row(std::string("a,b"), 1.0 / 3.0);
    t.row(std::string("say \"hi\""), Blank{});
    CHECK(t.text() == "name,value\r\nplain,0.10000000000000001\r\n\"a,b\",0.33333333333333331\r\n"
                      "\"say \"\"hi\"\"\",\r\n");
    CHECK_THROWS_AS(t.row(1.0), std::logic_error);
    CHECK(std::stod(csv_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("points specification", "[cli_runner]") {
    const auto g = parse_points("0:1:3");
    REQUIRE(g.size() == 3);
    CHECK(g[1].real() == 0.5);
    CHECK_THROWS_AS(parse_points("0:1"), ConfigError);
    CHECK_THROWS_AS(parse_points("a:b:c"), ConfigError);
    CHECK(parse_figure_selection("8,1") == std::vector<std::string>{"residuals", "capacity"});
    CHECK(parse_figure_selection("all").size() == 8);
}
