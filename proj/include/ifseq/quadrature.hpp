#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace ifseq {

// A point of [-1, 1] together with its distances to both ends. Near the ends
// 1 + x and 1 - x computed from x lose most of their digits; when the point
// comes from an angle they are computed directly.
struct FramePoint {
    double x = 0.0;
    double one_plus = 1.0;  // 1 + x
    double one_minus = 1.0; // 1 - x

    static FramePoint at(double x) noexcept { return {x, 1.0 + x, 1.0 - x}; }

    // x = cos(theta)
    static FramePoint from_angle(double theta) noexcept {
        const double c = std::cos(0.5 * theta);
        const double s = std::sin(0.5 * theta);
        return {std::cos(theta), 2.0 * c * c, 2.0 * s * s};
    }
};

// Gauss rule for the normalized Chebyshev measure ds / (pi sqrt(1 - s^2)) on
// [-1, 1]: nodes cos((2k - 1) pi / 2K), k = 1..K, all weights 1/K. Exact for
// polynomials of degree <= 2K - 1. Nodes are stored in k order, i.e.
// decreasing x.
class QuadratureRule {
public:
    explicit QuadratureRule(std::size_t order) : weight_(0.0) {
        if (order == 0) {
            throw std::invalid_argument("quadrature order must be positive");
        }
        weight_ = 1.0 / static_cast<double>(order);
        points_.reserve(order);
        nodes_.reserve(order);
        const double step = std::numbers::pi / (2.0 * static_cast<double>(order));
        for (std::size_t k = 1; k <= order; ++k) {
            const auto p = FramePoint::from_angle(static_cast<double>(2 * k - 1) * step);
            points_.push_back(p);
            nodes_.push_back(p.x);
        }
        weights_.assign(order, weight_);
    }

    std::size_t order() const noexcept { return points_.size(); }
    std::span<const double> nodes() const noexcept { return nodes_; }
    std::span<const double> weights() const noexcept { return weights_; }
    std::span<const FramePoint> points() const noexcept { return points_; }
    double weight() const noexcept { return weight_; }

private:
    double weight_;
    std::vector<FramePoint> points_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

inline QuadratureRule chebyshev_gauss(std::size_t order) { return QuadratureRule(order); }

} // namespace ifseq
