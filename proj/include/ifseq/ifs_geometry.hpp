#pragma once

// Affine iterated function systems on the line, the generation-n interval
// unions they produce, and the bookkeeping that ties gaps across generations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ifseq/errors.hpp"

namespace ifseq {

// s -> delta * (s - gamma) + gamma
struct AffineMap {
    double delta = 0.0;
    double gamma = 0.0;

    constexpr double operator()(double s) const noexcept { return delta * (s - gamma) + gamma; }

    friend bool operator==(const AffineMap&, const AffineMap&) = default;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const noexcept { return hi - lo; }
    double center() const noexcept { return 0.5 * (lo + hi); }
    double half_width() const noexcept { return 0.5 * (hi - lo); }
    bool contains(double x) const noexcept { return lo <= x && x <= hi; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

// The affine map psi taking an interval onto [-1, 1].
//
// Stored as center and half width rather than the A x + B form: for short
// intervals far from the origin, A x + B cancels two large numbers.
class UnitMap {
public:
    explicit UnitMap(Interval iv) : iv_(iv), center_(iv.center()), half_(iv.half_width()) {}

    double operator()(double s) const noexcept { return (s - center_) / half_; }
    double inverse(double x) const noexcept { return center_ + half_ * x; }

    // psi(s) = scale() * s + offset()
    double scale() const noexcept { return 1.0 / half_; }
    double offset() const noexcept { return -center_ / half_; }

    double half_width() const noexcept { return half_; }
    const Interval& interval() const noexcept { return iv_; }

private:
    Interval iv_;
    double center_;
    double half_;
};

inline UnitMap affine_to_unit(Interval iv) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.hi > iv.lo)) {
        std::ostringstream os;
        os << "degenerate interval [" << iv.lo << ", " << iv.hi << "]";
        throw DegenerateInterval(os.str());
    }
    return UnitMap(iv);
}

namespace detail {
// Minimum separation between neighbouring first-level images, relative to
// the hull width.
inline constexpr double kDisconnectionTolerance = 1e-12;
// Bands narrower than this fraction of the hull exhaust double precision.
inline constexpr double kWidthFloor = 1e-13;
inline constexpr std::size_t kMaxBands = std::size_t{1} << 22;
} // namespace detail

// A validated, fully disconnected IFS with maps sorted by fixed point.
class IfsSystem {
public:
    static IfsSystem validate(std::vector<AffineMap> maps) {
        if (maps.size() < 2) {
            throw TooFewMaps("an IFS needs at least 2 maps, got " + std::to_string(maps.size()));
        }
        for (std::size_t j = 0; j < maps.size(); ++j) {
            const auto& m = maps[j];
            if (!(m.delta > 0.0 && m.delta < 1.0) || !std::isfinite(m.gamma)) {
                std::ostringstream os;
                os << "map " << j << " is not contractive: delta = " << m.delta << " (must lie in (0, 1))";
                throw NotContractive(os.str());
            }
        }
        std::stable_sort(maps.begin(), maps.end(),
                         [](const AffineMap& a, const AffineMap& b) { return a.gamma < b.gamma; });
        for (std::size_t j = 0; j + 1 < maps.size(); ++j) {
            if (maps[j].gamma == maps[j + 1].gamma) {
                std::ostringstream os;
                os << "two maps share the fixed point " << maps[j].gamma;
                throw DuplicateFixedPoints(os.str());
            }
        }
        const Interval hull{maps.front().gamma, maps.back().gamma};
        const double min_gap = detail::kDisconnectionTolerance * hull.width();
        for (std::size_t j = 0; j + 1 < maps.size(); ++j) {
            const double right_end = maps[j](hull.hi);
            const double left_end = maps[j + 1](hull.lo);
            if (left_end - right_end < min_gap) {
                std::ostringstream os;
                os << "images of the hull under maps " << j << " and " << j + 1 << " are not disjoint: ["
                   << maps[j](hull.lo) << ", " << right_end << "] and [" << left_end << ", "
                   << maps[j + 1](hull.hi) << "]";
                throw OverlappingImages(os.str());
            }
        }
        return IfsSystem(std::move(maps));
    }

    std::span<const AffineMap> maps() const noexcept { return maps_; }
    std::size_t size() const noexcept { return maps_.size(); }
    const AffineMap& operator[](std::size_t j) const { return maps_[j]; }

    Interval hull() const noexcept { return {maps_.front().gamma, maps_.back().gamma}; }

private:
    explicit IfsSystem(std::vector<AffineMap> maps) : maps_(std::move(maps)) {}

    std::vector<AffineMap> maps_;
};

inline IfsSystem validate(std::vector<AffineMap> maps) { return IfsSystem::validate(std::move(maps)); }

inline Interval hull(const IfsSystem& ifs) noexcept { return ifs.hull(); }

// Bands E^n_i = [alpha_i, beta_i], the gaps (beta_i, alpha_{i+1}) between
// them, and for every gap the index of the same gap one generation earlier
// (std::nullopt for gaps created at this generation). All indices 0-based.
class BandSystem {
public:
    using Parent = std::optional<std::size_t>;

    // An arbitrary union of sorted disjoint intervals, with no history.
    static BandSystem from_intervals(std::vector<Interval> bands) {
        if (bands.empty()) {
            throw std::invalid_argument("a band system needs at least one interval");
        }
        for (std::size_t i = 0; i < bands.size(); ++i) {
            affine_to_unit(bands[i]);
            if (i > 0 && !(bands[i - 1].hi < bands[i].lo)) {
                throw std::invalid_argument("intervals must be sorted and pairwise disjoint");
            }
        }
        std::vector<Parent> genealogy(bands.size() - 1);
        return BandSystem(0, 0, std::move(bands), std::move(genealogy));
    }

    int generation() const noexcept { return generation_; }
    // Number of IFS maps that generated the system; 0 for from_intervals().
    std::size_t map_count() const noexcept { return map_count_; }

    std::span<const Interval> bands() const noexcept { return bands_; }
    std::span<const Interval> gaps() const noexcept { return gaps_; }
    std::span<const Parent> genealogy() const noexcept { return genealogy_; }

    std::size_t band_count() const noexcept { return bands_.size(); }
    std::size_t gap_count() const noexcept { return gaps_.size(); }
    const Interval& band(std::size_t i) const { return bands_[i]; }
    const Interval& gap(std::size_t m) const { return gaps_[m]; }
    Interval hull() const noexcept { return {bands_.front().lo, bands_.back().hi}; }

    std::size_t old_gap_count() const noexcept {
        return static_cast<std::size_t>(std::count_if(genealogy_.begin(), genealogy_.end(),
                                                      [](const Parent& p) { return p.has_value(); }));
    }

private:
    friend BandSystem generate_bands(const IfsSystem& ifs, int n);

    BandSystem(int generation, std::size_t map_count, std::vector<Interval> bands, std::vector<Parent> genealogy)
        : generation_(generation), map_count_(map_count), bands_(std::move(bands)),
          genealogy_(std::move(genealogy)) {
        gaps_.reserve(bands_.size() - 1);
        for (std::size_t i = 0; i + 1 < bands_.size(); ++i) {
            gaps_.push_back({bands_[i].hi, bands_[i + 1].lo});
        }
    }

    int generation_;
    std::size_t map_count_;
    std::vector<Interval> bands_;
    std::vector<Interval> gaps_;
    std::vector<Parent> genealogy_;
};

// Images of the hull under all length-n compositions phi_{j1} o ... o phi_{jn},
// enumerated with j1 varying slowest.
//
// Every endpoint is evaluated as the full composition applied to gamma_1 or
// gamma_M. Since phi_j fixes gamma_j exactly, the two endpoints of a gap that
// survives from generation n-1 are computed by the same floating-point
// operations at both generations and therefore agree bit for bit.
inline BandSystem generate_bands(const IfsSystem& ifs, int n) {
    if (n < 0) {
        throw std::invalid_argument("generation must be non-negative");
    }
    const std::size_t M = ifs.size();
    const Interval hull = ifs.hull();

    double min_delta = 1.0;
    for (const auto& m : ifs.maps()) {
        min_delta = std::min(min_delta, m.delta);
    }
    const double narrowest = std::pow(min_delta, n);
    std::size_t count = 1;
    for (int g = 0; g < n; ++g) {
        if (count > detail::kMaxBands / M) {
            throw GenerationTooLarge("generation " + std::to_string(n) + " has more than " +
                                     std::to_string(detail::kMaxBands) + " bands");
        }
        count *= M;
    }
    if (narrowest < detail::kWidthFloor) {
        std::ostringstream os;
        os << "generation " << n << " produces bands of relative width " << narrowest << " below the floor "
           << detail::kWidthFloor;
        throw GenerationTooLarge(os.str());
    }

    std::vector<Interval> bands(count);
    std::vector<std::size_t> word(static_cast<std::size_t>(n), 0);
    for (std::size_t b = 0; b < count; ++b) {
        std::size_t rest = b;
        for (int pos = n - 1; pos >= 0; --pos) {
            word[static_cast<std::size_t>(pos)] = rest % M;
            rest /= M;
        }
        double lo = hull.lo;
        double hi = hull.hi;
        for (int pos = n - 1; pos >= 0; --pos) {
            const AffineMap& phi = ifs[word[static_cast<std::size_t>(pos)]];
            lo = phi(lo);
            hi = phi(hi);
        }
        bands[b] = {lo, hi};
    }

    for (std::size_t b = 0; b < count; ++b) {
        if (!(bands[b].hi > bands[b].lo) || (b > 0 && !(bands[b - 1].hi < bands[b].lo))) {
            throw std::logic_error("generated bands are not sorted and disjoint");
        }
    }

    // Band b at generation n is a child of band b / M. The gap after the last
    // child of parent p is the gap after p itself.
    std::vector<BandSystem::Parent> genealogy(count - 1);
    for (std::size_t g = 0; g + 1 < count; ++g) {
        if ((g + 1) % M == 0) {
            genealogy[g] = (g + 1) / M - 1;
        }
    }
    return BandSystem(n, M, std::move(bands), std::move(genealogy));
}

} // namespace ifseq
