#pragma once

// Evaluation of the kernel Z(s) / sqrt|Y(s)| and of its Chebyshev-weighted
// integrals over gaps and bands.
//
// Y has a root at every band endpoint, Z a root zeta_m in every gap. Neither
// is ever expanded: all evaluation happens in the frame of the interval being
// integrated, rescaled to [-1, 1], where the two endpoints of that interval
// are absorbed into the Chebyshev weight and the remaining 2N - 2 endpoint
// factors face N - 1 root factors. The integrals are invariant under that
// rescaling, since Z and sqrt|Y| are homogeneous of degrees N - 1 and N.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ifseq/errors.hpp"
#include "ifseq/ifs_geometry.hpp"
#include "ifseq/quadrature.hpp"

namespace ifseq {

// Normalized gap roots lambda_m = psi_m(zeta_m) in (-1, 1), with psi_m the
// unit map of gap m, and the roots zeta_m themselves.
class GapVariables {
public:
    GapVariables(const BandSystem& bands, std::vector<double> lambdas) : lambdas_(std::move(lambdas)) {
        if (lambdas_.size() != bands.gap_count()) {
            throw InvalidVariables("expected " + std::to_string(bands.gap_count()) + " gap variables, got " +
                                   std::to_string(lambdas_.size()));
        }
        zetas_.reserve(lambdas_.size());
        for (std::size_t m = 0; m < lambdas_.size(); ++m) {
            const double lam = lambdas_[m];
            const Interval& g = bands.gap(m);
            const double zeta = UnitMap(g).inverse(lam);
            if (!(std::abs(lam) < 1.0) || !(g.lo < zeta && zeta < g.hi)) {
                std::ostringstream os;
                os << "gap variable " << m << " = " << lam << " does not place its root inside (" << g.lo << ", "
                   << g.hi << ")";
                throw InvalidVariables(os.str());
            }
            zetas_.push_back(zeta);
        }
    }

    // All roots at gap midpoints.
    static GapVariables midpoints(const BandSystem& bands) {
        return GapVariables(bands, std::vector<double>(bands.gap_count(), 0.0));
    }

    std::size_t size() const noexcept { return lambdas_.size(); }
    std::span<const double> lambdas() const noexcept { return lambdas_; }
    std::span<const double> zetas() const noexcept { return zetas_; }
    double lambda(std::size_t m) const { return lambdas_[m]; }
    double zeta(std::size_t m) const { return zetas_[m]; }

private:
    std::vector<double> lambdas_;
    std::vector<double> zetas_;
};

// The interval whose unit map defines the evaluation coordinates. Its two
// endpoints are the pair of Y factors folded into the Chebyshev weight.
struct Frame {
    enum class Kind { Gap, Band };

    Kind kind = Kind::Gap;
    std::size_t index = 0;

    static constexpr Frame gap(std::size_t i) noexcept { return {Kind::Gap, i}; }
    static constexpr Frame band(std::size_t j) noexcept { return {Kind::Band, j}; }

    Interval interval(const BandSystem& bands) const {
        return kind == Kind::Gap ? bands.gap(index) : bands.band(index);
    }
};

struct SignedLog {
    int sign = 1;
    double log_magnitude = 0.0;

    double value() const noexcept { return sign * std::exp(log_magnitude); }
};

enum class KernelMode {
    Grouped,  // ratio grouping of root and endpoint factors
    LogSpace, // sums of logarithms
};

namespace detail {

inline constexpr double kCollisionTolerance = 1e-15;

// Distances of every root and endpoint from the nearer end of a frame, in
// frame units. A point p left of the frame sits at x - psi(p) = (1 + x) + off,
// one right of it at x - psi(p) = -((1 - x) + off). Computing the offsets from
// the original coordinates keeps the factors accurate when x crowds an end.
struct FrameOffsets {
    Frame frame;
    double half = 1.0;
    double own_lambda = 0.0; // gap frames only
    std::vector<double> zeta;
    std::vector<double> alpha;
    std::vector<double> beta;

    bool zeta_left(std::size_t m) const noexcept { return m < frame.index; }
    bool band_left(std::size_t b) const noexcept {
        return frame.kind == Frame::Kind::Gap ? b <= frame.index : b < frame.index;
    }
    bool is_own_zeta(std::size_t m) const noexcept { return frame.kind == Frame::Kind::Gap && m == frame.index; }
    bool is_frame_alpha(std::size_t b) const noexcept {
        return frame.kind == Frame::Kind::Gap ? b == frame.index + 1 : b == frame.index;
    }
    bool is_frame_beta(std::size_t b) const noexcept { return b == frame.index; }

    static double distance(const FramePoint& t, double off, bool left) noexcept {
        return left ? t.one_plus + off : -(t.one_minus + off);
    }

    double zeta_distance(const FramePoint& t, std::size_t m) const noexcept {
        return is_own_zeta(m) ? t.x - own_lambda : distance(t, zeta[m], zeta_left(m));
    }
    double alpha_distance(const FramePoint& t, std::size_t b) const noexcept {
        return distance(t, alpha[b], band_left(b));
    }
    double beta_distance(const FramePoint& t, std::size_t b) const noexcept {
        return distance(t, beta[b], band_left(b));
    }
};

inline FrameOffsets frame_offsets(const Frame& frame, const BandSystem& bands, const GapVariables& vars) {
    const std::size_t limit = frame.kind == Frame::Kind::Gap ? bands.gap_count() : bands.band_count();
    if (frame.index >= limit) {
        throw std::out_of_range("frame index out of range");
    }
    const Interval iv = frame.interval(bands);
    FrameOffsets f;
    f.frame = frame;
    f.half = iv.half_width();
    const auto off = [&](double p, bool left) { return left ? (iv.lo - p) / f.half : (p - iv.hi) / f.half; };

    f.zeta.resize(vars.size());
    for (std::size_t m = 0; m < vars.size(); ++m) {
        f.zeta[m] = f.is_own_zeta(m) ? 0.0 : off(vars.zeta(m), f.zeta_left(m));
    }
    f.alpha.resize(bands.band_count());
    f.beta.resize(bands.band_count());
    for (std::size_t b = 0; b < bands.band_count(); ++b) {
        const bool left = f.band_left(b);
        f.alpha[b] = off(bands.band(b).lo, left);
        f.beta[b] = off(bands.band(b).hi, left);
    }
    if (frame.kind == Frame::Kind::Gap) {
        f.own_lambda = vars.lambda(frame.index);
    }
    return f;
}

inline void check_frame_point(const FramePoint& t) {
    if (!(std::abs(t.x) <= 1.0)) {
        throw std::domain_error("frame coordinate outside [-1, 1]");
    }
}

// log |Z| - 1/2 log |Y~| term by term; omit names a root left out of Z.
inline SignedLog log_kernel(const FrameOffsets& f, const FramePoint& t, std::optional<std::size_t> omit = {}) {
    double sum = 0.0;
    int sign = 1;
    const std::size_t gaps = f.zeta.size();
    for (std::size_t m = 0; m < gaps; ++m) {
        if (omit && *omit == m) {
            continue;
        }
        const double d = f.zeta_distance(t, m);
        if (std::abs(d) <= kCollisionTolerance * std::max(1.0, std::abs(t.x))) {
            std::ostringstream os;
            os << "evaluation point " << t.x << " coincides with the root of gap " << m;
            throw ExactNodeCollision(os.str());
        }
        sum += std::log(std::abs(d));
        if (d < 0.0) {
            sign = -sign;
        }
    }
    for (std::size_t b = 0; b < f.alpha.size(); ++b) {
        if (!f.is_frame_alpha(b)) {
            sum -= 0.5 * std::log(std::abs(f.alpha_distance(t, b)));
        }
        if (!f.is_frame_beta(b)) {
            sum -= 0.5 * std::log(std::abs(f.beta_distance(t, b)));
        }
    }
    return {sign, sum};
}

// Gap frame i, kernel without the own root factor (x - lambda_i). Each remote
// root is divided by the two endpoints of the band next to it on the far
// side from gap i, so every ratio is O(1) and tends to 1 with distance. The
// ends alpha_i and beta_{i+1} of the two bands touching the gap are left over.
inline double grouped_without_own(const FrameOffsets& f, const FramePoint& t) {
    const std::size_t i = f.frame.index;
    const std::size_t gaps = f.zeta.size();
    double product = 1.0;
    for (std::size_t m = 0; m < gaps; ++m) {
        if (m == i) {
            continue;
        }
        const std::size_t b = m < i ? m : m + 1;
        const double num = f.zeta_distance(t, m);
        const double den = std::abs(f.alpha_distance(t, b)) * std::abs(f.beta_distance(t, b));
        product *= num / std::sqrt(den);
    }
    const double near = std::abs(f.alpha_distance(t, i)) * std::abs(f.beta_distance(t, i + 1));
    return product / std::sqrt(near);
}

inline double without_own(const FrameOffsets& f, const FramePoint& t, KernelMode mode) {
    if (mode == KernelMode::Grouped) {
        return grouped_without_own(f, t);
    }
    return log_kernel(f, t, f.frame.index).value();
}

inline void check_gap_index(const BandSystem& bands, std::size_t i) {
    if (i >= bands.gap_count()) {
        throw std::out_of_range("gap index out of range");
    }
}

} // namespace detail

// Sign and log of |Z(x)| / sqrt|Y~(x)| at frame coordinate x, where Y~ omits
// the frame's own two endpoints. Throws ExactNodeCollision when x sits on a
// root of Z.
inline SignedLog kernel_log_magnitude(const Frame& frame, const FramePoint& t, const BandSystem& bands,
                                      const GapVariables& vars) {
    detail::check_frame_point(t);
    return detail::log_kernel(detail::frame_offsets(frame, bands, vars), t);
}

inline SignedLog kernel_log_magnitude(const Frame& frame, double x, const BandSystem& bands,
                                      const GapVariables& vars) {
    return kernel_log_magnitude(frame, FramePoint::at(x), bands, vars);
}

// Zbar_i(x) / sqrt|Y~_i(x)| in the frame of gap i, by ratio grouping.
inline double kernel_grouped(std::size_t i, const FramePoint& t, const BandSystem& bands, const GapVariables& vars) {
    detail::check_gap_index(bands, i);
    detail::check_frame_point(t);
    const auto f = detail::frame_offsets(Frame::gap(i), bands, vars);
    return detail::grouped_without_own(f, t) * (t.x - f.own_lambda);
}

inline double kernel_grouped(std::size_t i, double x, const BandSystem& bands, const GapVariables& vars) {
    return kernel_grouped(i, FramePoint::at(x), bands, vars);
}

// One grouped ratio of the gap-i kernel: (x - psi_i(zeta_m)) over the root
// of the two psi_i-images of the endpoints of the band paired with gap m.
inline double grouped_ratio(std::size_t i, std::size_t m, const FramePoint& t, const BandSystem& bands,
                            const GapVariables& vars) {
    detail::check_gap_index(bands, i);
    detail::check_gap_index(bands, m);
    if (m == i) {
        throw std::invalid_argument("the own root of a gap is not part of a grouped ratio");
    }
    const auto f = detail::frame_offsets(Frame::gap(i), bands, vars);
    const std::size_t b = m < i ? m : m + 1;
    return f.zeta_distance(t, m) / std::sqrt(std::abs(f.alpha_distance(t, b)) * std::abs(f.beta_distance(t, b)));
}

// K_i together with dK_i/dlambda_m for every m.
struct GapRow {
    double integral = 0.0;
    std::vector<double> derivatives;
};

// With F = Zbar_i / sqrt|Y~_i| and G = F / (x - lambda_i):
//   dK_i/dlambda_i = -sum_k w_k G(x_k)
//   dK_i/dlambda_m = -(h_m / h_i) sum_k w_k F(x_k) / (x_k - psi_i(zeta_m)),  m != i
// where h is a gap half width; d psi_i(zeta_m) / d zeta_m = 1/h_i and
// d zeta_m / d lambda_m = h_m.
inline GapRow gap_row(std::size_t i, const BandSystem& bands, const GapVariables& vars, const QuadratureRule& rule,
                      KernelMode mode = KernelMode::Grouped, bool with_derivatives = true) {
    detail::check_gap_index(bands, i);
    const auto f = detail::frame_offsets(Frame::gap(i), bands, vars);
    const std::size_t gaps = bands.gap_count();
    GapRow row;
    if (with_derivatives) {
        row.derivatives.assign(gaps, 0.0);
    }
    const double w = rule.weight();
    for (const FramePoint& t : rule.points()) {
        const double g = detail::without_own(f, t, mode);
        const double value = g * (t.x - f.own_lambda);
        row.integral += w * value;
        if (!with_derivatives) {
            continue;
        }
        for (std::size_t m = 0; m < gaps; ++m) {
            row.derivatives[m] += m == i ? w * g : w * value / f.zeta_distance(t, m);
        }
    }
    if (with_derivatives) {
        for (std::size_t m = 0; m < gaps; ++m) {
            const double chain = m == i ? 1.0 : bands.gap(m).half_width() / f.half;
            row.derivatives[m] *= -chain;
        }
    }
    return row;
}

// K_i = (1/pi) int_{G_i} Z / sqrt|Y| ds by the Chebyshev rule in the frame of
// gap i.
inline double gap_integral(std::size_t i, const BandSystem& bands, const GapVariables& vars,
                           const QuadratureRule& rule, KernelMode mode = KernelMode::Grouped) {
    return gap_row(i, bands, vars, rule, mode, false).integral;
}

inline double gap_jacobian(std::size_t i, std::size_t m, const BandSystem& bands, const GapVariables& vars,
                           const QuadratureRule& rule, KernelMode mode = KernelMode::Grouped) {
    detail::check_gap_index(bands, m);
    return gap_row(i, bands, vars, rule, mode).derivatives[m];
}

// w_k |Zbar_j(x_k)| / sqrt|Y~_j(x_k)| at the nodes of the rule, in the frame
// of band j: the share of the equilibrium measure carried by each node.
inline std::vector<double> band_node_weights(std::size_t j, const BandSystem& bands, const GapVariables& vars,
                                             const QuadratureRule& rule) {
    if (j >= bands.band_count()) {
        throw std::out_of_range("band index out of range");
    }
    const auto f = detail::frame_offsets(Frame::band(j), bands, vars);
    std::vector<double> out;
    out.reserve(rule.order());
    const double w = rule.weight();
    for (const FramePoint& t : rule.points()) {
        out.push_back(w * std::exp(detail::log_kernel(f, t).log_magnitude));
    }
    return out;
}

// omega_j = (1/pi) int_{E_j} |Z| / sqrt|Y| ds
inline double band_integral(std::size_t j, const BandSystem& bands, const GapVariables& vars,
                            const QuadratureRule& rule) {
    double sum = 0.0;
    for (double v : band_node_weights(j, bands, vars, rule)) {
        sum += v;
    }
    return sum;
}

} // namespace ifseq
