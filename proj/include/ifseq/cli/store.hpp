#pragma once

// Per-generation solution records on disk (gen_<n>.json) and the cache logic
// built on them.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "json.hpp"

#include "ifseq/cli/config.hpp"
#include "ifseq/equilibrium_solver.hpp"
#include "ifseq/errors.hpp"
#include "ifseq/ifs_geometry.hpp"

namespace ifseq::cli {

class IoError : public Error {
public:
    using Error::Error;
};

// A generation that is neither on disk (with the current fingerprint) nor
// allowed to be solved.
class MissingSolution : public IoError {
public:
    MissingSolution(int generation, const std::string& what) : IoError(what), generation_(generation) {}
    int generation() const noexcept { return generation_; }

private:
    int generation_;
};

// Writes next to the target and renames over it, so readers see either the
// old file or the complete new one.
inline void write_atomically(const std::filesystem::path& path, const std::string& contents) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
        }
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << contents;
        out.flush();
        if (!out) {
            std::filesystem::remove(tmp, ec);
            throw IoError("cannot write " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move " + tmp.string() + " to " + path.string());
    }
}

inline std::filesystem::path record_path(const std::filesystem::path& dir, int n) {
    return dir / ("gen_" + std::to_string(n) + ".json");
}

namespace detail {

inline nlohmann::json intervals(std::span<const Interval> iv) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& i : iv) {
        out.push_back({i.lo, i.hi});
    }
    return out;
}

} // namespace detail

// Doubles are written in shortest round-trip form, so reading a record back
// gives the stored values bit for bit.
inline nlohmann::json to_record(const RunConfig& cfg, const BandSystem& bands, const EquilibriumSolution& sol) {
    nlohmann::json genealogy = nlohmann::json::array();
    for (const auto& p : bands.genealogy()) {
        genealogy.push_back(p ? nlohmann::json(*p) : nlohmann::json(nullptr));
    }
    return {
        {"fingerprint", fingerprint(cfg)},
        {"config", canonical_solution_config(cfg)},
        {"generation", sol.generation},
        {"bands", detail::intervals(bands.bands())},
        {"gaps", detail::intervals(bands.gaps())},
        {"genealogy", genealogy},
        {"lambdas", sol.lambdas},
        {"zetas", sol.zetas},
        {"initial_residuals", sol.initial_residuals},
        {"residuals", sol.residuals},
        {"iterations_used", sol.iterations_used},
        {"omegas", sol.omegas},
        {"Omegas", sol.Omegas},
    };
}

inline void write_record(const std::filesystem::path& path, const nlohmann::json& record) {
    write_atomically(path, record.dump(1) + "\n");
}

inline EquilibriumSolution from_record(const nlohmann::json& r) {
    EquilibriumSolution sol;
    sol.generation = r.at("generation").get<int>();
    sol.lambdas = r.at("lambdas").get<std::vector<double>>();
    sol.zetas = r.at("zetas").get<std::vector<double>>();
    sol.initial_residuals = r.at("initial_residuals").get<std::vector<double>>();
    sol.residuals = r.at("residuals").get<std::vector<double>>();
    sol.iterations_used = r.at("iterations_used").get<int>();
    sol.omegas = r.at("omegas").get<std::vector<double>>();
    sol.Omegas = r.at("Omegas").get<std::vector<double>>();
    return sol;
}

// The stored solution for generation n if it was made with the same
// fingerprint and matches the band system; nullopt otherwise.
inline std::optional<EquilibriumSolution> read_cached(const std::filesystem::path& dir, const RunConfig& cfg,
                                                      const BandSystem& bands) {
    const auto path = record_path(dir, bands.generation());
    std::ifstream in(path);
    if (!in) {
        return std::nullopt;
    }
    try {
        const auto r = nlohmann::json::parse(in);
        if (r.at("fingerprint").get<std::string>() != fingerprint(cfg) ||
            r.at("config") != canonical_solution_config(cfg) || r.at("generation").get<int>() != bands.generation()) {
            return std::nullopt;
        }
        auto sol = from_record(r);
        const auto stored_bands = r.at("bands").get<std::vector<std::vector<double>>>();
        if (sol.lambdas.size() != bands.gap_count() || sol.omegas.size() != bands.band_count() ||
            stored_bands.size() != bands.band_count()) {
            return std::nullopt;
        }
        for (std::size_t j = 0; j < bands.band_count(); ++j) {
            if (stored_bands[j].size() != 2 || stored_bands[j][0] != bands.band(j).lo ||
                stored_bands[j][1] != bands.band(j).hi) {
                return std::nullopt;
            }
        }
        GapVariables(bands, sol.lambdas);
        return sol;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

struct Generation {
    BandSystem bands;
    EquilibriumSolution solution;
    bool from_cache = false;
};

// Generations 1..n_max, read from the cache where possible and otherwise
// solved (warm-started) and written, if solving is allowed. A solver failure
// leaves the generations before it on disk, and the best iterate of the
// failing one in gen_<n>.failed.json.
inline std::vector<Generation> obtain_generations(const RunConfig& cfg, bool allow_solve,
                                                  const std::function<void(const Generation&)>& progress = {}) {
    const auto ifs = cfg.ifs();
    std::vector<Generation> out;
    for (int n = 1; n <= cfg.n_max; ++n) {
        BandSystem bands = generate_bands(ifs, n);
        std::optional<EquilibriumSolution> cached;
        if (cfg.cache) {
            cached = read_cached(cfg.output_dir, cfg, bands);
        }
        if (cached) {
            cached->iterations_used = 0;
            out.push_back({std::move(bands), std::move(*cached), true});
        } else {
            if (!allow_solve) {
                throw MissingSolution(n, "no stored solution for generation " + std::to_string(n) + " in " +
                                             cfg.output_dir.string() + " matching this config; run `solve` first");
            }
            const GapVariables start =
                out.empty() ? GapVariables::midpoints(bands) : warm_start(bands, out.back().solution);
            EquilibriumSolution sol;
            try {
                sol = solve_generation(bands, start, cfg.solver);
            } catch (const SolverFailure& e) {
                auto failed = record_path(cfg.output_dir, n);
                failed.replace_extension(".failed.json");
                write_record(failed, to_record(cfg, bands, e.best()));
                throw;
            }
            write_record(record_path(cfg.output_dir, n), to_record(cfg, bands, sol));
            out.push_back({std::move(bands), std::move(sol), false});
        }
        if (progress) {
            progress(out.back());
        }
    }
    return out;
}

} // namespace ifseq::cli
