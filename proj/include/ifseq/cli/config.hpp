#pragma once

// Run configuration read from a single JSON document. Every problem found is
// collected, so a bad file is reported in one go.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ifseq/equilibrium_solver.hpp"
#include "ifseq/errors.hpp"
#include "ifseq/ifs_geometry.hpp"
#include "ifseq/measure_analytics.hpp"

namespace ifseq::cli {

class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : Error(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& p) {
        std::string out = "invalid configuration:";
        for (const auto& s : p) {
            out += "\n  - " + s;
        }
        return out;
    }

    std::vector<std::string> problems_;
};

struct RunConfig {
    std::vector<AffineMap> maps; // sorted by fixed point once validated
    int n_max = 1;
    SolverConfig solver;
    std::size_t sample_count = 4096;
    std::size_t fit_window = 4;
    std::optional<double> potential_point;
    HostBand host_band = HostBand::Product;
    std::size_t grid_points = 1001;
    std::filesystem::path output_dir = "out";
    bool cache = true;

    IfsSystem ifs() const { return IfsSystem::validate(maps); }
    std::size_t quadrature_order() const noexcept { return solver.quadrature_order; }
};

namespace detail {

// A number, or a string "p/q" / "p".
inline std::optional<double> read_real(const nlohmann::json& v) {
    if (v.is_number()) {
        return v.get<double>();
    }
    if (!v.is_string()) {
        return std::nullopt;
    }
    const std::string s = v.get<std::string>();
    const auto slash = s.find('/');
    try {
        std::size_t used = 0;
        if (slash == std::string::npos) {
            const double x = std::stod(s, &used);
            return used == s.size() ? std::optional<double>(x) : std::nullopt;
        }
        const std::string num = s.substr(0, slash);
        const std::string den = s.substr(slash + 1);
        const double p = std::stod(num, &used);
        if (used != num.size()) {
            return std::nullopt;
        }
        const double q = std::stod(den, &used);
        if (used != den.size() || q == 0.0) {
            return std::nullopt;
        }
        return p / q;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

} // namespace detail

inline RunConfig parse_config(const nlohmann::json& doc) {
    std::vector<std::string> problems;
    RunConfig cfg;
    if (!doc.is_object()) {
        throw ConfigError({"top level must be a JSON object"});
    }

    static const std::set<std::string> known = {
        "ifs",         "n_max",           "quadrature_order", "residual_tol", "max_iterations",
        "step_clamp",  "kernel",          "sample_count",     "fit_window",   "potential_point",
        "host_band",   "grid_points",     "output_dir",       "cache",        "description"};
    for (const auto& [key, value] : doc.items()) {
        if (!known.contains(key)) {
            problems.push_back("unknown key \"" + key + "\"");
        }
    }

    const auto integer = [&](const char* key, long long lo, long long fallback, bool required = false) {
        if (!doc.contains(key)) {
            if (required) {
                problems.push_back(std::string("missing required key \"") + key + "\"");
            }
            return fallback;
        }
        const auto& v = doc[key];
        if (!v.is_number_integer()) {
            problems.push_back(std::string("\"") + key + "\" must be an integer");
            return fallback;
        }
        const auto x = v.get<long long>();
        if (x < lo) {
            problems.push_back(std::string("\"") + key + "\" must be at least " + std::to_string(lo));
            return fallback;
        }
        return x;
    };
    const auto real = [&](const char* key, double fallback) {
        if (!doc.contains(key)) {
            return fallback;
        }
        const auto x = detail::read_real(doc[key]);
        if (!x) {
            problems.push_back(std::string("\"") + key + "\" must be a number");
            return fallback;
        }
        return *x;
    };
    const auto choice = [&](const char* key, const std::vector<std::string>& options) -> std::size_t {
        if (!doc.contains(key)) {
            return 0;
        }
        const auto& v = doc[key];
        if (v.is_string()) {
            for (std::size_t k = 0; k < options.size(); ++k) {
                if (v.get<std::string>() == options[k]) {
                    return k;
                }
            }
        }
        std::string all;
        for (const auto& o : options) {
            all += (all.empty() ? "" : ", ") + ("\"" + o + "\"");
        }
        problems.push_back(std::string("\"") + key + "\" must be one of " + all);
        return 0;
    };

    // maps
    bool maps_ok = false;
    if (!doc.contains("ifs")) {
        problems.push_back("missing required key \"ifs\"");
    } else if (!doc["ifs"].is_array()) {
        problems.push_back("\"ifs\" must be an array of maps");
    } else {
        maps_ok = true;
        std::size_t k = 0;
        for (const auto& m : doc["ifs"]) {
            const std::string where = "ifs[" + std::to_string(k++) + "]";
            std::optional<double> delta;
            std::optional<double> gamma;
            if (m.is_object()) {
                for (const auto& [key, value] : m.items()) {
                    if (key != "delta" && key != "gamma") {
                        problems.push_back(where + ": unknown key \"" + key + "\"");
                    }
                }
                delta = m.contains("delta") ? detail::read_real(m["delta"]) : std::nullopt;
                gamma = m.contains("gamma") ? detail::read_real(m["gamma"]) : std::nullopt;
            } else if (m.is_array() && m.size() == 2) {
                delta = detail::read_real(m[0]);
                gamma = detail::read_real(m[1]);
            }
            if (!delta || !gamma) {
                problems.push_back(where + ": expected {\"delta\": number, \"gamma\": number}");
                maps_ok = false;
                continue;
            }
            cfg.maps.push_back({*delta, *gamma});
        }
    }

    cfg.n_max = static_cast<int>(integer("n_max", 1, 1, true));
    cfg.solver.quadrature_order = static_cast<std::size_t>(integer("quadrature_order", 1, 2048));
    cfg.solver.residual_tol = real("residual_tol", 1e-12);
    cfg.solver.max_iterations = static_cast<int>(integer("max_iterations", 0, 200));
    cfg.solver.step_clamp = real("step_clamp", 1e-9);
    cfg.solver.kernel = choice("kernel", {"grouped", "log"}) == 0 ? KernelMode::Grouped : KernelMode::LogSpace;
    cfg.sample_count = static_cast<std::size_t>(integer("sample_count", 1, 4096));
    cfg.fit_window = static_cast<std::size_t>(integer("fit_window", 3, 4));
    if (doc.contains("potential_point")) {
        cfg.potential_point = real("potential_point", 0.0);
    }
    cfg.host_band = choice("host_band", {"product", "node_sum"}) == 0 ? HostBand::Product : HostBand::NodeSum;
    cfg.grid_points = static_cast<std::size_t>(integer("grid_points", 2, 1001));
    if (doc.contains("output_dir")) {
        if (doc["output_dir"].is_string() && !doc["output_dir"].get<std::string>().empty()) {
            cfg.output_dir = doc["output_dir"].get<std::string>();
        } else {
            problems.push_back("\"output_dir\" must be a non-empty string");
        }
    }
    if (doc.contains("cache")) {
        if (doc["cache"].is_boolean()) {
            cfg.cache = doc["cache"].get<bool>();
        } else {
            problems.push_back("\"cache\" must be true or false");
        }
    }
    if (doc.contains("description") && !doc["description"].is_string()) {
        problems.push_back("\"description\" must be a string");
    }

    try {
        cfg.solver.check();
    } catch (const std::invalid_argument& e) {
        problems.push_back(e.what());
    }

    if (maps_ok) {
        try {
            const auto ifs = IfsSystem::validate(cfg.maps);
            cfg.maps.assign(ifs.maps().begin(), ifs.maps().end());
            if (cfg.n_max >= 1) {
                generate_bands(ifs, cfg.n_max);
            }
            if (cfg.potential_point && !ifs.hull().contains(*cfg.potential_point)) {
                problems.push_back("\"potential_point\" lies outside the hull of the IFS");
            }
        } catch (const InvalidIfs& e) {
            problems.push_back(std::string("ifs: ") + e.what());
        } catch (const GenerationTooLarge& e) {
            problems.push_back(std::string("n_max: ") + e.what());
        }
    }

    if (!problems.empty()) {
        throw ConfigError(std::move(problems));
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError({"cannot read config file " + path.string()});
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError({path.string() + ": " + e.what()});
    }
    return parse_config(doc);
}

// The part of the configuration a stored solution depends on.
inline nlohmann::json canonical_solution_config(const RunConfig& cfg) {
    nlohmann::json maps = nlohmann::json::array();
    for (const auto& m : cfg.maps) {
        maps.push_back({m.delta, m.gamma});
    }
    return {{"ifs", maps}, {"quadrature_order", cfg.solver.quadrature_order}, {"residual_tol", cfg.solver.residual_tol}};
}

// FNV-1a, 64 bit, of the canonical text, as 16 hex digits.
inline std::string fingerprint(const RunConfig& cfg) {
    const std::string text = canonical_solution_config(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace ifseq::cli
