#pragma once

// Quantities derived from a converged equilibrium measure: the integrated
// measure Omega(x), the logarithmic potential V(z) = -int log|z - s| dsigma(s),
// and capacities extrapolated across generations.

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ifseq/equilibrium_solver.hpp"
#include "ifseq/errors.hpp"
#include "ifseq/exponential_fit.hpp"
#include "ifseq/ifs_geometry.hpp"
#include "ifseq/quadrature.hpp"
#include "ifseq/stable_kernel.hpp"

namespace ifseq {

// A point closer than this fraction of its band's width to a quadrature node
// counts as a collision.
inline constexpr double kNodeCollisionFraction = 1e-12;

// How the band containing Re z enters V(z).
enum class HostBand {
    // Chebyshev series of the band density, integrated against log|z - s|
    // exactly term by term. Accurate everywhere on the band.
    Product,
    // Plain sum over the point masses at the nodes, retried with K + 1 and
    // K + 3 nodes on a collision. Between nodes it is off by up to about
    // log|2 T_K(x)| / K, which averages out over the band.
    NodeSum,
};

// The equilibrium measure of one band system, discretized as point masses at
// the Chebyshev nodes of every band.
class EquilibriumMeasure {
public:
    EquilibriumMeasure(BandSystem bands, GapVariables vars, std::size_t quadrature_order,
                       HostBand host = HostBand::Product)
        : bands_(std::move(bands)), vars_(std::move(vars)), rule_(quadrature_order), host_(host) {
        weights_.reserve(bands_.band_count());
        double running = 0.0;
        for (std::size_t j = 0; j < bands_.band_count(); ++j) {
            weights_.push_back(band_node_weights(j, bands_, vars_, rule_));
            double omega = 0.0;
            for (double w : weights_.back()) {
                omega += w;
            }
            running += omega;
            omegas_.push_back(omega);
            Omegas_.push_back(running);
        }
        one_plus_.reserve(rule_.order());
        one_minus_.reserve(rule_.order());
        for (const auto& p : rule_.points()) {
            one_plus_.push_back(p.one_plus);
            one_minus_.push_back(p.one_minus);
        }
        if (host_ == HostBand::Product) {
            series_.reserve(bands_.band_count());
            for (const auto& w : weights_) {
                series_.push_back(chebyshev_coefficients(w));
            }
        }
    }

    EquilibriumMeasure(const BandSystem& bands, const EquilibriumSolution& sol, std::size_t quadrature_order,
                       HostBand host = HostBand::Product)
        : EquilibriumMeasure(bands, sol.variables(bands), quadrature_order, host) {}

    const BandSystem& bands() const noexcept { return bands_; }
    const GapVariables& variables() const noexcept { return vars_; }
    const QuadratureRule& rule() const noexcept { return rule_; }
    int generation() const noexcept { return bands_.generation(); }
    HostBand host_band() const noexcept { return host_; }

    std::span<const double> omegas() const noexcept { return omegas_; }
    std::span<const double> Omegas() const noexcept { return Omegas_; }
    std::span<const double> band_weights(std::size_t j) const { return weights_.at(j); }
    double total_mass() const noexcept { return Omegas_.back(); }

    // Omega(x) = sigma([gamma_1, x]). Inside band j the partial integral is
    // taken in the angle theta with s = psi_j^{-1}(cos theta), which removes
    // the inverse square root at the band's left end.
    double integrated_measure_at(double x) const {
        const Interval h = bands_.hull();
        if (!(x >= h.lo && x <= h.hi)) {
            std::ostringstream os;
            os << "x = " << x << " lies outside the hull [" << h.lo << ", " << h.hi << "]";
            throw OutOfHull(os.str());
        }
        const auto all = bands_.bands();
        const auto it = std::lower_bound(all.begin(), all.end(), x,
                                         [](const Interval& b, double v) { return b.hi < v; });
        const auto j = static_cast<std::size_t>(it - all.begin());
        const double before = j == 0 ? 0.0 : Omegas_[j - 1];
        const Interval& band = all[j];
        if (x <= band.lo) {
            return before;
        }
        if (x >= band.hi) {
            return Omegas_[j];
        }
        const double theta0 = 2.0 * std::asin(std::sqrt((band.hi - x) / band.width()));
        const auto f = detail::frame_offsets(Frame::band(j), bands_, vars_);
        const auto density = [&](double theta) {
            return std::exp(detail::log_kernel(f, FramePoint::from_angle(theta)).log_magnitude);
        };
        const double partial =
            boost::math::quadrature::gauss<double, 64>::integrate(density, theta0, std::numbers::pi);
        return before + partial / std::numbers::pi;
    }

    // V(z). With HostBand::Product every band goes through its Chebyshev
    // series; with NodeSum the node masses are summed, with retries on the
    // band holding Re z.
    double potential_at(std::complex<double> z) const {
        const double x = z.real();
        const double y = z.imag();
        double sum = 0.0;
        for (std::size_t j = 0; j < bands_.band_count(); ++j) {
            const Interval& band = bands_.band(j);
            if (host_ == HostBand::Product) {
                // valid in the whole plane; near a band edge the node sum is not
                sum += band_series(j, x, y);
            } else if (x > band.lo && x < band.hi) {
                sum += host_band_log_sum(j, x, y);
            } else {
                sum += outside_band_log_sum(j, x, y);
            }
        }
        return -sum;
    }

    double potential_at(double x) const { return potential_at(std::complex<double>(x, 0.0)); }

    // E(sigma) = int V dsigma, with V sampled at the nodes of a rule of the
    // given order (default K + 1, whose nodes never meet the K-point nodes).
    double energy(std::optional<std::size_t> sample_order = {}) const {
        const QuadratureRule sample(sample_order.value_or(rule_.order() + 1));
        double e = 0.0;
        for (std::size_t j = 0; j < bands_.band_count(); ++j) {
            const auto w = band_node_weights(j, bands_, vars_, sample);
            const UnitMap psi(bands_.band(j));
            for (std::size_t k = 0; k < sample.order(); ++k) {
                e += w[k] * potential_at(psi.inverse(sample.nodes()[k]));
            }
        }
        return e;
    }

private:
    // Coefficients c_k of the band density g(t) = sum_k c_k T_k(t) against the
    // normalized Chebyshev weight, from its values at the K nodes:
    // c_0 = omega, c_k = 2 sum_i W_i cos(k theta_i). cos(k theta_i) is read
    // from a table of cos(m pi / 2K), m = k (2i - 1) mod 4K.
    std::vector<double> chebyshev_coefficients(const std::vector<double>& w) const {
        const std::size_t K = w.size();
        const std::size_t period = 4 * K;
        if (cos_table_.size() != period) {
            cos_table_.resize(period);
            for (std::size_t m = 0; m < period; ++m) {
                cos_table_[m] = std::cos(static_cast<double>(m) * std::numbers::pi / (2.0 * static_cast<double>(K)));
            }
        }
        std::vector<double> c(K, 0.0);
        for (std::size_t i = 0; i < K; ++i) {
            const std::size_t step = 2 * i + 1;
            std::size_t m = 0;
            const double wi = w[i];
            for (std::size_t k = 0; k < K; ++k) {
                c[k] += wi * cos_table_[m];
                m += step;
                if (m >= period) {
                    m -= period;
                }
            }
        }
        for (std::size_t k = 1; k < K; ++k) {
            c[k] *= 2.0;
        }
        return c;
    }

    // int log|z - s| dsigma_j(s) by the Chebyshev series of band j. With
    // t = psi_j(z) = (u + 1/u) / 2, |u| >= 1,
    //   int log|t - s| T_k(s) ds / (pi sqrt(1 - s^2)) = log|u| - log 2      (k = 0)
    //                                                 = -Re(u^-k) / k      (k >= 1).
    double band_series(std::size_t j, double x, double y) const {
        const Interval& band = bands_.band(j);
        const double h = band.half_width();
        const double from_lo = (x - band.lo) / h;
        const double from_hi = (band.hi - x) / h;
        const double t = from_lo <= from_hi ? from_lo - 1.0 : 1.0 - from_hi;
        const std::complex<double> tz(t, y / h);
        // sqrt(t - 1) sqrt(t + 1) keeps |u| >= 1 in the whole plane
        const std::complex<double> root =
            std::sqrt(std::complex<double>(-from_hi, y / h)) * std::sqrt(std::complex<double>(from_lo, y / h));
        std::complex<double> u = tz + root;
        if (std::abs(u) < 1.0) {
            u = tz - root;
        }
        const auto& c = series_[j];
        const std::complex<double> q = 1.0 / u;
        std::complex<double> p = 1.0;
        double sum = 0.0;
        for (std::size_t k = 1; k < c.size(); ++k) {
            p *= q;
            sum -= c[k] * p.real() / static_cast<double>(k);
        }
        return sum + c[0] * (std::log(h) + std::log(std::abs(u)) - std::numbers::ln2);
    }

    // sum_k W_k log|z - s_k| for a band not containing Re z.
    double outside_band_log_sum(std::size_t j, double x, double y) const {
        const Interval& band = bands_.band(j);
        const double h = band.half_width();
        const auto& w = weights_[j];
        const std::size_t K = w.size();
        double sum = 0.0;
        const bool left = x <= band.lo;
        const double gap = left ? band.lo - x : x - band.hi;
        const auto& offs = left ? one_plus_ : one_minus_;
        if (y == 0.0) {
            for (std::size_t k = 0; k < K; ++k) {
                sum += w[k] * std::log(gap + h * offs[k]);
            }
        } else {
            for (std::size_t k = 0; k < K; ++k) {
                const double d = gap + h * offs[k];
                sum += w[k] * 0.5 * std::log(d * d + y * y);
            }
        }
        return sum;
    }

    // sum_k W_k log|z - s_k| for the band containing Re z, with retries.
    double host_band_log_sum(std::size_t j, double x, double y) const {
        const Interval& band = bands_.band(j);
        const double h = band.half_width();
        const double from_lo = (x - band.lo) / h; // 1 + t
        const double from_hi = (band.hi - x) / h; // 1 - t
        const double t = from_lo <= from_hi ? from_lo - 1.0 : 1.0 - from_hi;
        const double yy = y / h;
        const double threshold = 2.0 * kNodeCollisionFraction;

        const auto attempt = [&](const QuadratureRule& rule, std::span<const double> w) -> std::optional<double> {
            double sum = 0.0;
            const auto pts = rule.points();
            for (std::size_t k = 0; k < pts.size(); ++k) {
                const double d = t < 0.0 ? from_lo - pts[k].one_plus : pts[k].one_minus - from_hi;
                const double r2 = d * d + yy * yy;
                if (r2 < threshold * threshold) {
                    return std::nullopt;
                }
                sum += w[k] * (std::log(h) + 0.5 * std::log(r2));
            }
            return sum;
        };

        if (auto v = attempt(rule_, weights_[j])) {
            return *v;
        }
        for (std::size_t extra : {std::size_t{1}, std::size_t{3}}) {
            const QuadratureRule rule(rule_.order() + extra);
            if (auto v = attempt(rule, band_node_weights(j, bands_, vars_, rule))) {
                return *v;
            }
        }
        std::ostringstream os;
        os.precision(17);
        os << "z = (" << x << ", " << y << ") coincides with a quadrature node of band " << j << " at orders "
           << rule_.order() << ", " << rule_.order() + 1 << " and " << rule_.order() + 3;
        throw PersistentCollision(os.str());
    }

    BandSystem bands_;
    GapVariables vars_;
    QuadratureRule rule_;
    HostBand host_;
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> series_;
    mutable std::vector<double> cos_table_;
    std::vector<double> omegas_;
    std::vector<double> Omegas_;
    std::vector<double> one_plus_;
    std::vector<double> one_minus_;
};

inline double integrated_measure_at(double x, const EquilibriumMeasure& measure) {
    return measure.integrated_measure_at(x);
}

inline double potential_at(std::complex<double> z, const EquilibriumMeasure& measure) {
    return measure.potential_at(z);
}

// count points spread over the bands of a (deep) band system: each band gets
// count / N of them, the first count % N bands one more, placed at the images
// of the Chebyshev nodes of that order. Returned in increasing order. Being
// inside E^n, the same points lie in E^m for every m <= n.
inline std::vector<double> attractor_sample_points(const BandSystem& deepest, std::size_t count) {
    const std::size_t N = deepest.band_count();
    std::vector<double> pts;
    pts.reserve(count);
    for (std::size_t j = 0; j < N; ++j) {
        const std::size_t here = count / N + (j < count % N ? 1 : 0);
        if (here == 0) {
            continue;
        }
        const QuadratureRule rule(here);
        const UnitMap psi(deepest.band(j));
        for (std::size_t k = here; k-- > 0;) {
            pts.push_back(psi.inverse(rule.nodes()[k]));
        }
    }
    return pts;
}

struct PotentialSummary {
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> values;   // per used point, in input order
    std::vector<double> excluded; // points dropped after persistent collisions
};

// Arithmetic mean of V over the points. Points that keep colliding with
// nodes are dropped and reported, up to 0.1% of the sample.
inline PotentialSummary mean_potential(const EquilibriumMeasure& measure, std::span<const double> points) {
    PotentialSummary out;
    out.values.reserve(points.size());
    for (double x : points) {
        try {
            out.values.push_back(measure.potential_at(x));
        } catch (const PersistentCollision&) {
            out.excluded.push_back(x);
        }
    }
    if (out.values.empty() || (!out.excluded.empty() && out.excluded.size() * 1000 >= points.size())) {
        throw PersistentCollision(std::to_string(out.excluded.size()) + " of " + std::to_string(points.size()) +
                                  " sample points collide with quadrature nodes");
    }
    double sum = 0.0;
    for (double v : out.values) {
        sum += v;
    }
    out.mean = sum / static_cast<double>(out.values.size());
    double sq = 0.0;
    for (double v : out.values) {
        sq += (v - out.mean) * (v - out.mean);
    }
    out.stddev = std::sqrt(sq / static_cast<double>(out.values.size()));
    return out;
}

enum class PotentialPath {
    Mean,  // average over attractor sample points
    Point, // a single point of the attractor
};

struct CapacityConfig {
    PotentialPath path = PotentialPath::Mean;
    std::size_t sample_count = 4096;
    // For PotentialPath::Point; defaults to the leftmost sample point.
    std::optional<double> point;
    std::size_t fit_window = 4;
};

struct CapacityEstimate {
    // (n, -log C(E^n))
    std::vector<std::pair<int, double>> per_generation;
    // Empty when the sequence is already constant.
    std::optional<ExponentialFit> fit;
    double extrapolated_capacity = 0.0;
};

// Fits the last fit_window values and reports exp(-a).
inline CapacityEstimate capacity_from_potentials(std::vector<std::pair<int, double>> per_generation,
                                                 std::size_t fit_window = 4) {
    if (per_generation.empty()) {
        throw std::invalid_argument("no potentials to extrapolate");
    }
    CapacityEstimate est;
    est.per_generation = std::move(per_generation);
    const auto& pg = est.per_generation;
    const double first = pg.front().second;
    const bool constant = std::all_of(pg.begin(), pg.end(), [&](const auto& p) {
        return std::abs(p.second - first) <= 1e-14 * std::max(1.0, std::abs(first));
    });
    if (constant) {
        est.extrapolated_capacity = std::exp(-pg.back().second);
        return est;
    }
    const std::size_t window = std::min(fit_window, pg.size());
    std::vector<FitPoint> pts;
    for (std::size_t k = pg.size() - window; k < pg.size(); ++k) {
        pts.push_back({static_cast<double>(pg[k].first), pg[k].second});
    }
    est.fit = fit_exponential(pts);
    est.extrapolated_capacity = std::exp(-est.fit->a);
    return est;
}

// -log C(E^n) for every measure through the potential on E^n, then the
// exponential extrapolation. The measures must be ordered by generation,
// deepest last; sample points come from the deepest one.
inline CapacityEstimate capacity_estimate(std::span<const EquilibriumMeasure> measures, const CapacityConfig& cfg) {
    if (measures.empty()) {
        throw std::invalid_argument("capacity_estimate needs at least one generation");
    }
    const auto points = attractor_sample_points(measures.back().bands(), cfg.sample_count);
    std::vector<std::pair<int, double>> per_generation;
    for (const auto& m : measures) {
        double v = 0.0;
        if (cfg.path == PotentialPath::Mean) {
            v = mean_potential(m, points).mean;
        } else {
            v = m.potential_at(cfg.point.value_or(points.front()));
        }
        per_generation.emplace_back(m.generation(), v);
    }
    return capacity_from_potentials(std::move(per_generation), cfg.fit_window);
}

} // namespace ifseq
