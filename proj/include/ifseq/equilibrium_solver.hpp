#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ifseq/errors.hpp"
#include "ifseq/ifs_geometry.hpp"
#include "ifseq/quadrature.hpp"
#include "ifseq/stable_kernel.hpp"

namespace ifseq {

struct SolverConfig {
    double residual_tol = 1e-12;
    int max_iterations = 200;
    // Iterates keep every lambda inside [-1 + step_clamp, 1 - step_clamp].
    double step_clamp = 1e-9;
    std::size_t quadrature_order = 2048;
    KernelMode kernel = KernelMode::Grouped;
    double initial_trust_radius = 1.0;

    void check() const {
        if (!(residual_tol > 0.0)) {
            throw std::invalid_argument("residual_tol must be positive");
        }
        if (!(step_clamp > 0.0 && step_clamp < 1.0)) {
            throw std::invalid_argument("step_clamp must lie in (0, 1)");
        }
        if (max_iterations < 0) {
            throw std::invalid_argument("max_iterations must be non-negative");
        }
        if (quadrature_order == 0) {
            throw std::invalid_argument("quadrature_order must be positive");
        }
        if (!(initial_trust_radius > 0.0)) {
            throw std::invalid_argument("initial_trust_radius must be positive");
        }
    }
};

struct EquilibriumSolution {
    int generation = 0;
    std::vector<double> lambdas;
    std::vector<double> zetas;
    // |K_i| at the starting point and at the returned point.
    std::vector<double> initial_residuals;
    std::vector<double> residuals;
    int iterations_used = 0;
    // omega_i, the equilibrium measure of band i, and the running sums
    // Omega_m = omega_0 + ... + omega_m.
    std::vector<double> omegas;
    std::vector<double> Omegas;

    double max_residual() const noexcept {
        double r = 0.0;
        for (double v : residuals) {
            r = std::max(r, v);
        }
        return r;
    }

    GapVariables variables(const BandSystem& bands) const { return GapVariables(bands, lambdas); }
};

// Raised with the best iterate reached, so callers can report it.
class SolverFailure : public Error {
public:
    SolverFailure(const std::string& what, EquilibriumSolution best) : Error(what), best_(std::move(best)) {}

    int generation() const noexcept { return best_.generation; }
    const EquilibriumSolution& best() const noexcept { return best_; }

private:
    EquilibriumSolution best_;
};

class NoConvergence : public SolverFailure {
public:
    using SolverFailure::SolverFailure;
};

class SingularJacobian : public SolverFailure {
public:
    using SolverFailure::SolverFailure;
};

// Residuals K_i and the Jacobian dK_i/dlambda_m.
struct GapSystem {
    Eigen::VectorXd residuals;
    Eigen::MatrixXd jacobian;
};

inline GapSystem evaluate_gap_system(const BandSystem& bands, const GapVariables& vars, const QuadratureRule& rule,
                                     KernelMode mode = KernelMode::Grouped) {
    const auto n = static_cast<Eigen::Index>(bands.gap_count());
    GapSystem sys{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const GapRow row = gap_row(static_cast<std::size_t>(i), bands, vars, rule, mode);
        sys.residuals(i) = row.integral;
        for (Eigen::Index m = 0; m < n; ++m) {
            sys.jacobian(i, m) = row.derivatives[static_cast<std::size_t>(m)];
        }
    }
    return sys;
}

namespace detail {

inline std::vector<double> abs_values(const Eigen::VectorXd& v) {
    std::vector<double> out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out[static_cast<std::size_t>(i)] = std::abs(v(i));
    }
    return out;
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Powell's dogleg: the Newton step if it fits in the trust region, otherwise
// the point where the path Cauchy point -> Newton step leaves it.
inline Eigen::VectorXd dogleg_step(const Eigen::VectorXd& newton, const Eigen::MatrixXd& jac,
                                   const Eigen::VectorXd& f, double radius) {
    if (newton.norm() <= radius) {
        return newton;
    }
    const Eigen::VectorXd grad = jac.transpose() * f;
    const double gnorm = grad.norm();
    if (gnorm == 0.0) {
        return newton * (radius / newton.norm());
    }
    const double jg = (jac * grad).squaredNorm();
    const Eigen::VectorXd cauchy = -(gnorm * gnorm / jg) * grad;
    const double cnorm = cauchy.norm();
    if (cnorm >= radius) {
        return cauchy * (radius / cnorm);
    }
    // |cauchy + tau (newton - cauchy)| = radius, tau in (0, 1)
    const Eigen::VectorXd diff = newton - cauchy;
    const double a = diff.squaredNorm();
    const double b = 2.0 * cauchy.dot(diff);
    const double c = cnorm * cnorm - radius * radius;
    const double tau = (-b + std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
    return cauchy + tau * diff;
}

// Largest fraction of the step that keeps every component in [-limit, limit].
inline double bound_fraction(const Eigen::VectorXd& x, const Eigen::VectorXd& step, double limit) {
    double tau = 1.0;
    for (Eigen::Index m = 0; m < x.size(); ++m) {
        const double target = x(m) + step(m);
        if (target > limit) {
            tau = std::min(tau, (limit - x(m)) / step(m));
        } else if (target < -limit) {
            tau = std::min(tau, (-limit - x(m)) / step(m));
        }
    }
    return std::max(tau, 0.0);
}

} // namespace detail

// omega and Omega for a set of roots.
inline void fill_measures(EquilibriumSolution& sol, const BandSystem& bands, const GapVariables& vars,
                          const QuadratureRule& rule) {
    sol.omegas.clear();
    sol.Omegas.clear();
    double running = 0.0;
    for (std::size_t j = 0; j < bands.band_count(); ++j) {
        const double w = band_integral(j, bands, vars, rule);
        running += w;
        sol.omegas.push_back(w);
        sol.Omegas.push_back(running);
    }
}

// Solves K_i(lambda) = 0 for every gap by a Newton-type trust-region
// iteration with the analytic Jacobian.
inline EquilibriumSolution solve_generation(const BandSystem& bands, const GapVariables& initial,
                                            const SolverConfig& cfg) {
    cfg.check();
    const QuadratureRule rule(cfg.quadrature_order);
    const auto n = static_cast<Eigen::Index>(bands.gap_count());
    const double limit = 1.0 - cfg.step_clamp;

    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(initial.lambdas().data(), n);
    for (Eigen::Index m = 0; m < n; ++m) {
        x(m) = std::clamp(x(m), -limit, limit);
    }

    const auto evaluate = [&](const Eigen::VectorXd& at) {
        return evaluate_gap_system(bands, GapVariables(bands, detail::to_std(at)), rule, cfg.kernel);
    };

    GapSystem sys = evaluate(x);

    EquilibriumSolution sol;
    sol.generation = bands.generation();
    sol.initial_residuals = detail::abs_values(sys.residuals);

    const auto snapshot = [&](int iterations) {
        EquilibriumSolution s = sol;
        s.lambdas = detail::to_std(x);
        s.residuals = detail::abs_values(sys.residuals);
        s.iterations_used = iterations;
        const GapVariables vars(bands, s.lambdas);
        s.zetas.assign(vars.zetas().begin(), vars.zetas().end());
        return s;
    };

    double radius = cfg.initial_trust_radius;
    int iterations = 0;
    while (n > 0 && sys.residuals.lpNorm<Eigen::Infinity>() > cfg.residual_tol) {
        if (iterations >= cfg.max_iterations) {
            std::ostringstream os;
            os << "generation " << bands.generation() << ": no convergence after " << iterations
               << " iterations, max |K_i| = " << sys.residuals.lpNorm<Eigen::Infinity>();
            throw NoConvergence(os.str(), snapshot(iterations));
        }
        ++iterations;

        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.jacobian);
        const double rcond = lu.rcond();
        if (!(rcond > 1e-15)) {
            std::ostringstream os;
            os << "generation " << bands.generation() << ": singular Jacobian (rcond = " << rcond << ")";
            throw SingularJacobian(os.str(), snapshot(iterations));
        }
        const Eigen::VectorXd newton = lu.solve(-sys.residuals);

        Eigen::VectorXd step = detail::dogleg_step(newton, sys.jacobian, sys.residuals, radius);
        step *= detail::bound_fraction(x, step, limit);
        const double step_norm = step.norm();

        const Eigen::VectorXd trial = x + step;
        GapSystem trial_sys = evaluate(trial);

        const double current = sys.residuals.squaredNorm();
        const double predicted = current - (sys.residuals + sys.jacobian * step).squaredNorm();
        const double actual = current - trial_sys.residuals.squaredNorm();
        const double ratio = predicted > 0.0 ? actual / predicted : (actual > 0.0 ? 1.0 : -1.0);

        const bool converged = trial_sys.residuals.lpNorm<Eigen::Infinity>() <= cfg.residual_tol;
        if (ratio > 1e-4 || converged) {
            x = trial;
            sys = std::move(trial_sys);
        }
        if (ratio < 0.25) {
            radius = 0.25 * step_norm;
        } else if (ratio > 0.75) {
            radius = std::max(radius, 2.0 * step_norm);
        }
        if (!converged && radius <= std::numeric_limits<double>::epsilon() * std::max(1.0, x.norm())) {
            std::ostringstream os;
            os << "generation " << bands.generation() << ": trust region collapsed at max |K_i| = "
               << sys.residuals.lpNorm<Eigen::Infinity>();
            throw NoConvergence(os.str(), snapshot(iterations));
        }
    }

    sol = snapshot(iterations);
    fill_measures(sol, bands, GapVariables(bands, sol.lambdas), rule);
    return sol;
}

// Starting point for generation n from the solution at n - 1: gaps that
// already existed keep their lambda, new gaps start at their midpoint.
inline GapVariables warm_start(const BandSystem& bands, const EquilibriumSolution& previous) {
    std::vector<double> lambdas(bands.gap_count(), 0.0);
    for (std::size_t m = 0; m < bands.gap_count(); ++m) {
        if (const auto& parent = bands.genealogy()[m]) {
            if (*parent >= previous.lambdas.size()) {
                throw std::invalid_argument("previous solution does not match the band genealogy");
            }
            lambdas[m] = previous.lambdas[*parent];
        }
    }
    return GapVariables(bands, std::move(lambdas));
}

// Called after each generation is solved.
using GenerationCallback = std::function<void(const BandSystem&, const EquilibriumSolution&)>;

// Generations 1..n_max, each warm-started from the one before.
inline std::vector<EquilibriumSolution> hierarchical_solve(const IfsSystem& ifs, int n_max, const SolverConfig& cfg,
                                                           const GenerationCallback& on_generation = {}) {
    if (n_max < 1) {
        throw std::invalid_argument("n_max must be at least 1");
    }
    std::vector<EquilibriumSolution> out;
    out.reserve(static_cast<std::size_t>(n_max));
    for (int n = 1; n <= n_max; ++n) {
        const BandSystem bands = generate_bands(ifs, n);
        const GapVariables start = out.empty() ? GapVariables::midpoints(bands) : warm_start(bands, out.back());
        out.push_back(solve_generation(bands, start, cfg));
        if (on_generation) {
            on_generation(bands, out.back());
        }
    }
    return out;
}

} // namespace ifseq
