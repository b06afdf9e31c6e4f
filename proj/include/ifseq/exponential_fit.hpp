#pragma once

// Fits f(n) = a + b exp(-c n) to a short sequence converging geometrically.

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "ifseq/errors.hpp"

namespace ifseq {

struct FitPoint {
    double n = 0.0;
    double y = 0.0;
};

struct ExponentialFit {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    double operator()(double n) const noexcept { return a + b * std::exp(-c * n); }
};

namespace detail {

// Interpolates three points exactly. For equally spaced abscissae
// exp(-c h) = (y3 - y2) / (y2 - y1); otherwise c solves
// exp(-c h1) (1 - exp(-c h2)) / (1 - exp(-c h1)) = (y3 - y2) / (y2 - y1).
inline ExponentialFit three_point_fit(const FitPoint& p1, const FitPoint& p2, const FitPoint& p3) {
    const double d1 = p2.y - p1.y;
    const double d2 = p3.y - p2.y;
    const double h1 = p2.n - p1.n;
    const double h2 = p3.n - p2.n;
    const double r = d2 / d1;
    if (!(r > 0.0)) {
        throw NonMonotoneInput("successive differences change sign");
    }
    double c = 0.0;
    if (h1 == h2) {
        if (!(r < 1.0)) {
            throw NonDecayingInput("differences do not shrink; no decaying exponential fits");
        }
        c = -std::log(r) / h1;
    } else {
        if (!(r < h2 / h1)) {
            throw NonDecayingInput("differences do not shrink; no decaying exponential fits");
        }
        const auto ratio = [&](double cc) {
            return std::exp(-cc * h1) * -std::expm1(-cc * h2) / -std::expm1(-cc * h1) - r;
        };
        double hi = 1.0;
        while (ratio(hi) > 0.0) {
            hi *= 2.0;
            if (hi > 1e6) {
                throw NonDecayingInput("decay rate out of range");
            }
        }
        std::uintmax_t iters = 200;
        const auto bracket = boost::math::tools::toms748_solve(
            ratio, 0.0 + std::numeric_limits<double>::min(), hi, boost::math::tools::eps_tolerance<double>(52),
            iters);
        c = 0.5 * (bracket.first + bracket.second);
    }
    // y1 = a + B, y2 = a + B exp(-c h1) with B = b exp(-c n1)
    const double big_b = d1 / std::expm1(-c * h1);
    const double b = big_b * std::exp(c * p1.n);
    const double a = p1.y - big_b;
    return {a, b, c};
}

} // namespace detail

// With three points the fit interpolates them. With more, (a, b, c) minimize
// the squared residuals, starting from the interpolant of the last three.
inline ExponentialFit fit_exponential(std::span<const FitPoint> input) {
    std::vector<FitPoint> pts(input.begin(), input.end());
    std::sort(pts.begin(), pts.end(), [](const FitPoint& l, const FitPoint& r) { return l.n < r.n; });
    for (std::size_t k = 0; k < pts.size(); ++k) {
        if (!std::isfinite(pts[k].n) || !std::isfinite(pts[k].y)) {
            throw std::invalid_argument("fit points must be finite");
        }
        if (k > 0 && pts[k].n == pts[k - 1].n) {
            throw std::invalid_argument("fit points need distinct abscissae");
        }
    }
    if (pts.size() < 3) {
        throw std::invalid_argument("an exponential fit needs at least 3 points");
    }
    int sign = 0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const double d = pts[k + 1].y - pts[k].y;
        const int s = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
        if (s == 0 || (sign != 0 && s != sign)) {
            throw NonMonotoneInput("sequence is not strictly monotone; no exponential fit is meaningful");
        }
        sign = s;
    }

    const std::size_t k = pts.size();
    ExponentialFit fit = detail::three_point_fit(pts[k - 3], pts[k - 2], pts[k - 1]);
    if (k == 3) {
        return fit;
    }

    // Levenberg-Marquardt on (a, b, c).
    const auto rows = static_cast<Eigen::Index>(k);
    const auto residuals = [&](const ExponentialFit& f) {
        Eigen::VectorXd r(rows);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const auto& p = pts[static_cast<std::size_t>(i)];
            r(i) = f(p.n) - p.y;
        }
        return r;
    };
    Eigen::VectorXd r = residuals(fit);
    double cost = r.squaredNorm();
    double damping = 1e-3;
    for (int iter = 0; iter < 200; ++iter) {
        Eigen::MatrixXd jac(rows, 3);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const double n = pts[static_cast<std::size_t>(i)].n;
            const double e = std::exp(-fit.c * n);
            jac(i, 0) = 1.0;
            jac(i, 1) = e;
            jac(i, 2) = -fit.b * n * e;
        }
        const Eigen::Matrix3d normal = jac.transpose() * jac;
        const Eigen::Vector3d rhs = -jac.transpose() * r;
        bool improved = false;
        bool converged = false;
        while (damping < 1e12) {
            Eigen::Matrix3d lhs = normal;
            lhs.diagonal() += damping * normal.diagonal();
            const Eigen::Vector3d delta = lhs.colPivHouseholderQr().solve(rhs);
            const ExponentialFit trial{fit.a + delta(0), fit.b + delta(1), fit.c + delta(2)};
            const Eigen::VectorXd tr = residuals(trial);
            const double tc = tr.squaredNorm();
            const double scale = std::abs(fit.a) + std::abs(fit.b) + std::abs(fit.c);
            converged = delta.lpNorm<Eigen::Infinity>() <= 1e-15 * scale;
            if (tc <= cost) {
                fit = trial;
                r = tr;
                cost = tc;
                damping = std::max(damping * 0.1, 1e-12);
                improved = true;
                break;
            }
            if (converged) {
                break;
            }
            damping *= 10.0;
        }
        if (!improved || converged) {
            break;
        }
    }
    if (!(fit.c > 0.0)) {
        std::ostringstream os;
        os << "fitted decay rate c = " << fit.c << " is not positive";
        throw NonDecayingInput(os.str());
    }
    return fit;
}

inline ExponentialFit fit_exponential(std::initializer_list<FitPoint> pts) {
    return fit_exponential(std::span<const FitPoint>(pts.begin(), pts.size()));
}

} // namespace ifseq
