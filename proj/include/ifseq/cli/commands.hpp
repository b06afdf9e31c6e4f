#pragma once

// The four commands of ifseq-cli. Each returns the process exit code:
// 0 success, 2 configuration or usage error, 3 solver failure, 4 I/O error
// (including solutions missing from the output directory).

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ifseq/cli/config.hpp"
#include "ifseq/cli/csv.hpp"
#include "ifseq/cli/store.hpp"
#include "ifseq/equilibrium_solver.hpp"
#include "ifseq/exponential_fit.hpp"
#include "ifseq/measure_analytics.hpp"

namespace ifseq::cli {

enum ExitCode : int {
    kSuccess = 0,
    kConfigError = 2,
    kSolverFailure = 3,
    kIoError = 4,
};

// Figure ids, in output order, with the file each one writes.
inline const std::vector<std::pair<std::string, std::string>>& figure_files() {
    static const std::vector<std::pair<std::string, std::string>> files = {
        {"residuals", "residuals_before_after.csv"},
        {"jacobian", "jacobian_decay.csv"},
        {"lambda", "lambda_vs_n.csv"},
        {"omega", "Omega_vs_n.csv"},
        {"omega_x", "Omega_of_x.csv"},
        {"gapmeasure", "gapmeasure_fit.csv"},
        {"potential", "potential_profile.csv"},
        {"capacity", "capacity_table.csv"},
    };
    return files;
}

// "all", an id, or the figure number 1..8; comma separated.
inline std::vector<std::string> parse_figure_selection(const std::string& which) {
    const auto& files = figure_files();
    std::vector<std::string> out;
    std::stringstream ss(which);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "all") {
            for (const auto& f : files) {
                out.push_back(f.first);
            }
            continue;
        }
        bool found = false;
        for (std::size_t k = 0; k < files.size(); ++k) {
            if (item == files[k].first || item == std::to_string(k + 1)) {
                out.push_back(files[k].first);
                found = true;
            }
        }
        if (!found) {
            throw ConfigError({"unknown figure id \"" + item + "\""});
        }
    }
    if (out.empty()) {
        throw ConfigError({"no figure selected"});
    }
    std::vector<std::string> unique;
    for (const auto& f : files) {
        if (std::find(out.begin(), out.end(), f.first) != out.end()) {
            unique.push_back(f.first);
        }
    }
    return unique;
}

namespace detail {

inline long long ll(std::size_t v) { return static_cast<long long>(v); }

// Genealogy line of every gap at every generation: a gap keeps the line of
// its parent, new gaps open new lines.
inline std::vector<std::vector<long long>> gap_lines(const std::vector<Generation>& gens) {
    std::vector<std::vector<long long>> lines;
    long long next = 0;
    for (const auto& g : gens) {
        std::vector<long long> here(g.bands.gap_count());
        for (std::size_t m = 0; m < here.size(); ++m) {
            const auto& p = g.bands.genealogy()[m];
            here[m] = p && !lines.empty() ? lines.back()[*p] : next++;
        }
        lines.push_back(std::move(here));
    }
    return lines;
}

inline std::vector<double> grid(const Interval& iv, std::size_t count) {
    std::vector<double> x(count);
    for (std::size_t k = 0; k < count; ++k) {
        x[k] = k + 1 == count ? iv.hi : iv.lo + iv.width() * static_cast<double>(k) / static_cast<double>(count - 1);
    }
    return x;
}

} // namespace detail

// Everything derived from the solved generations. Measures are built on
// first use.
class FigureBuilder {
public:
    FigureBuilder(const RunConfig& cfg, const std::vector<Generation>& gens) : cfg_(cfg), gens_(gens) {}

    CsvTable residuals() const {
        CsvTable t({"n", "gap", "residual_before", "residual_after"});
        for (const auto& g : gens_) {
            for (std::size_t m = 0; m < g.solution.residuals.size(); ++m) {
                t.row(static_cast<long long>(g.solution.generation), detail::ll(m), g.solution.initial_residuals[m],
                      g.solution.residuals[m]);
            }
        }
        return t;
    }

    // |dK_i/dlambda_m| at the deepest solution.
    CsvTable jacobian() const {
        CsvTable t({"n", "i", "m", "offset", "abs_derivative", "ratio_to_diagonal"});
        const auto& g = gens_.back();
        if (g.bands.gap_count() == 0) {
            return t;
        }
        const QuadratureRule rule(cfg_.quadrature_order());
        const auto sys = evaluate_gap_system(g.bands, g.solution.variables(g.bands), rule, cfg_.solver.kernel);
        const auto n = g.bands.gap_count();
        for (std::size_t i = 0; i < n; ++i) {
            const double diag = std::abs(sys.jacobian(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
            for (std::size_t m = 0; m < n; ++m) {
                const double v = std::abs(sys.jacobian(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)));
                t.row(static_cast<long long>(g.solution.generation), detail::ll(i), detail::ll(m),
                      static_cast<long long>(i) - static_cast<long long>(m), v, v / diag);
            }
        }
        return t;
    }

    CsvTable lambdas() const {
        CsvTable t({"n", "gap", "line", "parent", "lambda", "zeta"});
        const auto lines = detail::gap_lines(gens_);
        for (std::size_t k = 0; k < gens_.size(); ++k) {
            const auto& g = gens_[k];
            for (std::size_t m = 0; m < g.bands.gap_count(); ++m) {
                const auto& p = g.bands.genealogy()[m];
                t.add({static_cast<long long>(g.solution.generation), detail::ll(m), lines[k][m],
                       p ? CsvCell(detail::ll(*p)) : CsvCell(Blank{}), g.solution.lambdas[m], g.solution.zetas[m]});
            }
        }
        return t;
    }

    // Omega at the plateau of every gap, i.e. Omega_m for the band left of it.
    CsvTable omega_vs_n() const {
        CsvTable t({"n", "gap", "line", "Omega"});
        const auto lines = detail::gap_lines(gens_);
        for (std::size_t k = 0; k < gens_.size(); ++k) {
            const auto& g = gens_[k];
            for (std::size_t m = 0; m < g.bands.gap_count(); ++m) {
                t.row(static_cast<long long>(g.solution.generation), detail::ll(m), lines[k][m], g.solution.Omegas[m]);
            }
        }
        return t;
    }

    CsvTable omega_of_x() const {
        CsvTable t({"n", "x", "Omega"});
        for (std::size_t k = 0; k < gens_.size(); ++k) {
            const auto& m = measure(k);
            for (double x : detail::grid(m.bands().hull(), cfg_.grid_points)) {
                t.row(static_cast<long long>(m.generation()), x, m.integrated_measure_at(x));
            }
        }
        return t;
    }

    // Plateau of the gap created first (gap 0 of generation 1) along its
    // genealogy line, with a + b exp(-c n) fitted to all generations.
    CsvTable gap_measure() const {
        CsvTable t({"n", "gap", "Omega", "fitted", "a", "b", "c"});
        std::vector<FitPoint> pts;
        std::vector<std::size_t> index;
        std::size_t m = 0;
        for (std::size_t k = 0; k < gens_.size(); ++k) {
            if (gens_[k].bands.gap_count() == 0) {
                return t;
            }
            if (k > 0) {
                m = (m + 1) * gens_[k].bands.map_count() - 1;
            }
            index.push_back(m);
            pts.push_back({static_cast<double>(gens_[k].solution.generation), gens_[k].solution.Omegas[m]});
        }
        std::optional<ExponentialFit> fit;
        try {
            fit = fit_exponential(pts);
        } catch (const std::exception&) {
        }
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (fit) {
                t.row(static_cast<long long>(pts[k].n), detail::ll(index[k]), pts[k].y, (*fit)(pts[k].n), fit->a,
                      fit->b, fit->c);
            } else {
                t.row(static_cast<long long>(pts[k].n), detail::ll(index[k]), pts[k].y, Blank{}, Blank{}, Blank{},
                      Blank{});
            }
        }
        return t;
    }

    CsvTable potential_profile() const {
        CsvTable t({"n", "x", "V"});
        for (std::size_t k = 0; k < gens_.size(); ++k) {
            const auto& m = measure(k);
            for (double x : detail::grid(m.bands().hull(), cfg_.grid_points)) {
                t.row(static_cast<long long>(m.generation()), x, m.potential_at(x));
            }
        }
        return t;
    }

    struct Capacity {
        std::vector<int> n;
        std::vector<double> point;
        std::vector<PotentialSummary> mean;
        double point_x = 0.0;
        std::optional<CapacityEstimate> by_point;
        std::optional<CapacityEstimate> by_mean;
        std::string fit_problem;
    };

    const Capacity& capacity() const {
        if (capacity_) {
            return *capacity_;
        }
        Capacity c;
        const auto pts = attractor_sample_points(gens_.back().bands, cfg_.sample_count);
        c.point_x = cfg_.potential_point.value_or(pts.front());
        std::vector<std::pair<int, double>> vp;
        std::vector<std::pair<int, double>> vm;
        for (std::size_t k = 0; k < gens_.size(); ++k) {
            const auto& m = measure(k);
            c.n.push_back(m.generation());
            c.point.push_back(m.potential_at(c.point_x));
            c.mean.push_back(mean_potential(m, pts));
            vp.emplace_back(m.generation(), c.point.back());
            vm.emplace_back(m.generation(), c.mean.back().mean);
        }
        try {
            c.by_point = capacity_from_potentials(vp, cfg_.fit_window);
            c.by_mean = capacity_from_potentials(vm, cfg_.fit_window);
        } catch (const std::exception& e) {
            c.by_point.reset();
            c.by_mean.reset();
            c.fit_problem = e.what();
        }
        capacity_ = std::move(c);
        return *capacity_;
    }

    CsvTable capacity_table() const {
        const auto& c = capacity();
        CsvTable t({"n", "V_point", "V_mean", "V_stddev", "excluded", "fit_point", "fit_mean"});
        const auto curve = [](const std::optional<CapacityEstimate>& e, double n) -> CsvCell {
            if (!e) {
                return Blank{};
            }
            return e->fit ? CsvCell((*e->fit)(n)) : CsvCell(e->per_generation.back().second);
        };
        for (std::size_t k = 0; k < c.n.size(); ++k) {
            t.add({static_cast<long long>(c.n[k]), c.point[k], c.mean[k].mean, c.mean[k].stddev,
                   detail::ll(c.mean[k].excluded.size()), curve(c.by_point, c.n[k]), curve(c.by_mean, c.n[k])});
        }
        return t;
    }

    CsvTable capacity_fit() const {
        const auto& c = capacity();
        CsvTable t({"path", "x", "n_first", "n_last", "a", "b", "c", "capacity"});
        const auto window = std::min(cfg_.fit_window, c.n.size());
        const long long first = c.n[c.n.size() - window];
        const long long last = c.n.back();
        const auto add = [&](const std::string& path, const std::optional<CapacityEstimate>& e, CsvCell x) {
            if (!e) {
                t.add({path, x, first, last, Blank{}, Blank{}, Blank{}, Blank{}});
            } else if (!e->fit) {
                t.add({path, x, first, last, e->per_generation.back().second, 0.0, Blank{}, e->extrapolated_capacity});
            } else {
                t.add({path, x, first, last, e->fit->a, e->fit->b, e->fit->c, e->extrapolated_capacity});
            }
        };
        add("point", c.by_point, c.point_x);
        add("mean", c.by_mean, Blank{});
        return t;
    }

    const EquilibriumMeasure& measure(std::size_t k) const {
        if (measures_.empty()) {
            measures_.resize(gens_.size());
        }
        if (!measures_[k]) {
            const auto& g = gens_[k];
            measures_[k].emplace(g.bands, g.solution, cfg_.quadrature_order(), cfg_.host_band);
        }
        return *measures_[k];
    }

private:
    const RunConfig& cfg_;
    const std::vector<Generation>& gens_;
    mutable std::vector<std::optional<EquilibriumMeasure>> measures_;
    mutable std::optional<Capacity> capacity_;
};

namespace detail {

inline void report_generation(std::ostream& out, const Generation& g) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "n=%d bands=%zu iterations=%d max|K|=%.3e sum(omega)-1=%.3e%s\n",
                  g.solution.generation, g.bands.band_count(), g.solution.iterations_used, g.solution.max_residual(),
                  g.solution.Omegas.empty() ? 0.0 : g.solution.Omegas.back() - 1.0, g.from_cache ? " (cached)" : "");
    out << buf;
}

inline void write_table(const RunConfig& cfg, const std::string& name, const CsvTable& t, std::ostream& out) {
    const auto path = cfg.output_dir / name;
    write_atomically(path, t.text());
    out << "wrote " << path.string() << " (" << t.rows() - 1 << " rows)\n";
}

// Runs body, translating the library's exceptions into exit codes.
template <class Body>
int guarded(std::ostream& err, Body&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << e.what() << "\n";
        return kConfigError;
    } catch (const SolverFailure& e) {
        err << "solver failure: " << e.what() << "\n";
        err << "best iterate: max|K| = " << e.best().max_residual() << " after " << e.best().iterations_used
            << " iterations\n";
        return kSolverFailure;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kIoError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kIoError;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kSolverFailure;
    }
}

} // namespace detail

inline int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        obtain_generations(cfg, true, [&](const Generation& g) { detail::report_generation(out, g); });
        return int{kSuccess};
    });
}

inline int cmd_figures(const RunConfig& cfg, const std::string& which, bool solve_missing, std::ostream& out,
                       std::ostream& err) {
    return detail::guarded(err, [&] {
        const auto selected = parse_figure_selection(which);
        const auto gens = obtain_generations(cfg, solve_missing);
        const FigureBuilder fb(cfg, gens);
        for (const auto& id : selected) {
            std::string file;
            for (const auto& [fid, name] : figure_files()) {
                if (fid == id) {
                    file = name;
                }
            }
            if (id == "residuals") {
                detail::write_table(cfg, file, fb.residuals(), out);
            } else if (id == "jacobian") {
                detail::write_table(cfg, file, fb.jacobian(), out);
            } else if (id == "lambda") {
                detail::write_table(cfg, file, fb.lambdas(), out);
            } else if (id == "omega") {
                detail::write_table(cfg, file, fb.omega_vs_n(), out);
            } else if (id == "omega_x") {
                detail::write_table(cfg, file, fb.omega_of_x(), out);
            } else if (id == "gapmeasure") {
                detail::write_table(cfg, file, fb.gap_measure(), out);
            } else if (id == "potential") {
                detail::write_table(cfg, file, fb.potential_profile(), out);
            } else if (id == "capacity") {
                detail::write_table(cfg, file, fb.capacity_table(), out);
                detail::write_table(cfg, "capacity_fit.csv", fb.capacity_fit(), out);
            }
        }
        return int{kSuccess};
    });
}

inline int cmd_capacity(const RunConfig& cfg, bool solve_missing, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        const auto gens = obtain_generations(cfg, solve_missing);
        const FigureBuilder fb(cfg, gens);
        const auto& c = fb.capacity();
        char buf[200];
        std::snprintf(buf, sizeof buf, "%3s  %-20s  %-20s  %s\n", "n", "V(x)", "<V>", "stddev");
        out << buf;
        for (std::size_t k = 0; k < c.n.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%3d  %-20.12f  %-20.12f  %.3e\n", c.n[k], c.point[k], c.mean[k].mean,
                          c.mean[k].stddev);
            out << buf;
        }
        std::snprintf(buf, sizeof buf, "x = %.17g\n", c.point_x);
        out << buf;
        for (const auto& [name, est] : {std::pair{"point", &c.by_point}, std::pair{"mean", &c.by_mean}}) {
            if (!*est) {
                out << name << ": no fit (" << c.fit_problem << ")\n";
                continue;
            }
            const auto& e = **est;
            if (e.fit) {
                std::snprintf(buf, sizeof buf, "%-5s a=%.10f b=%.10f c=%.10f  C=%.10f\n", name, e.fit->a, e.fit->b,
                              e.fit->c, e.extrapolated_capacity);
            } else {
                std::snprintf(buf, sizeof buf, "%-5s constant sequence  C=%.10f\n", name, e.extrapolated_capacity);
            }
            out << buf;
        }
        detail::write_table(cfg, "capacity_table.csv", fb.capacity_table(), out);
        detail::write_table(cfg, "capacity_fit.csv", fb.capacity_fit(), out);
        return int{kSuccess};
    });
}

// "lo:hi:count" gives count equally spaced real points; anything else is read
// as a file with one point per line, "x" or "x,y" (blank lines and lines
// starting with # are skipped).
inline std::vector<std::complex<double>> parse_points(const std::string& spec) {
    std::vector<std::complex<double>> pts;
    if (!std::filesystem::exists(spec)) {
        std::stringstream ss(spec);
        std::string lo;
        std::string hi;
        std::string count;
        if (std::getline(ss, lo, ':') && std::getline(ss, hi, ':') && std::getline(ss, count) && ss.eof()) {
            try {
                std::size_t used = 0;
                const double a = std::stod(lo, &used);
                const bool ok_a = used == lo.size();
                const double b = std::stod(hi, &used);
                const bool ok_b = used == hi.size();
                const long c = std::stol(count, &used);
                if (ok_a && ok_b && used == count.size() && c >= 1 && a <= b) {
                    for (long k = 0; k < c; ++k) {
                        pts.emplace_back(c == 1 ? a : a + (b - a) * static_cast<double>(k) / static_cast<double>(c - 1),
                                         0.0);
                    }
                    return pts;
                }
            } catch (const std::exception&) {
            }
        }
        throw ConfigError({"--points: \"" + spec + "\" is neither a readable file nor a grid lo:hi:count"});
    }
    std::ifstream in(spec);
    if (!in) {
        throw IoError("cannot read points file " + spec);
    }
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        double x = 0.0;
        double y = 0.0;
        std::string rest;
        if (!(fields >> x)) {
            throw ConfigError({spec + ":" + std::to_string(lineno) + ": expected a number"});
        }
        if (!(fields >> y)) {
            y = 0.0;
        }
        if (fields >> rest) {
            throw ConfigError({spec + ":" + std::to_string(lineno) + ": too many fields"});
        }
        pts.emplace_back(x, y);
    }
    if (pts.empty()) {
        throw ConfigError({spec + ": no points"});
    }
    return pts;
}

inline int cmd_potential(const RunConfig& cfg, const std::string& points, std::optional<int> generation,
                         bool solve_missing, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        const auto pts = parse_points(points);
        const int n = generation.value_or(cfg.n_max);
        if (n < 1 || n > cfg.n_max) {
            throw ConfigError({"--generation must lie in 1.." + std::to_string(cfg.n_max)});
        }
        const auto gens = obtain_generations(cfg, solve_missing);
        const FigureBuilder fb(cfg, gens);
        const auto& m = fb.measure(static_cast<std::size_t>(n - 1));
        CsvTable t({"n", "x", "y", "V"});
        for (const auto& z : pts) {
            t.row(static_cast<long long>(n), z.real(), z.imag(), m.potential_at(z));
        }
        detail::write_table(cfg, "potential.csv", t, out);
        return int{kSuccess};
    });
}

} // namespace ifseq::cli
