#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ifseq/exponential_fit.hpp"

using namespace ifseq;

namespace {

std::vector<FitPoint> sample(const ExponentialFit& f, std::vector<double> ns) {
    std::vector<FitPoint> out;
    for (double n : ns) {
        out.push_back({n, f(n)});
    }
    return out;
}

} // namespace

TEST_CASE("round trip through four synthesized points", "[exponential_fit]") {
    const ExponentialFit truth{0.81668890, -0.1278376, 0.66927525};
    const auto fit = fit_exponential(sample(truth, {4, 5, 6, 7}));
    CHECK(std::abs(fit.a - truth.a) < 1e-9);
    CHECK(std::abs(fit.b - truth.b) < 1e-9);
    CHECK(std::abs(fit.c - truth.c) < 1e-9);
}

TEST_CASE("three equally spaced points are interpolated in closed form", "[exponential_fit]") {
    const auto fit = fit_exponential({{1, 1.5}, {2, 1.25}, {3, 1.125}});
    CHECK(std::abs(fit.a - 1.0) < 1e-12);
    CHECK(std::abs(fit.c - std::log(2.0)) < 1e-12);
    CHECK(std::abs(fit.b - 1.0) < 1e-12);
}

TEST_CASE("geometric sequence 1 + 2^-n", "[exponential_fit]") {
    std::vector<FitPoint> pts;
    for (int n = 1; n <= 8; ++n) {
        pts.push_back({static_cast<double>(n), 1.0 + std::pow(2.0, -n)});
    }
    const auto fit = fit_exponential(pts);
    CHECK(std::abs(fit.a - 1.0) < 1e-12);
    CHECK(std::abs(fit.c - std::log(2.0)) < 1e-12);
}

TEST_CASE("unequal spacing and unsorted input", "[exponential_fit]") {
    const ExponentialFit truth{-2.0, 3.0, 0.4};
    const auto three = fit_exponential(sample(truth, {7, 1, 2.5}));
    CHECK(std::abs(three.a - truth.a) < 1e-10);
    CHECK(std::abs(three.b - truth.b) < 1e-10);
    CHECK(std::abs(three.c - truth.c) < 1e-10);

    const auto many = fit_exponential(sample(truth, {0, 0.5, 3, 4, 9}));
    CHECK(std::abs(many.a - truth.a) < 1e-10);
    CHECK(std::abs(many.c - truth.c) < 1e-10);
}

TEST_CASE("noisy data is fitted in the least-squares sense", "[exponential_fit]") {
    const ExponentialFit truth{0.5, 1.0, 0.8};
    auto pts = sample(truth, {1, 2, 3, 4, 5, 6});
    const double noise[] = {1e-6, -1e-6, 5e-7, -5e-7, 2e-7, -2e-7};
    for (std::size_t k = 0; k < pts.size(); ++k) {
        pts[k].y += noise[k];
    }
    const auto fit = fit_exponential(pts);
    double cost = 0.0;
    double cost_truth = 0.0;
    for (const auto& p : pts) {
        cost += std::pow(fit(p.n) - p.y, 2);
        cost_truth += std::pow(truth(p.n) - p.y, 2);
    }
    CHECK(cost <= cost_truth);
    CHECK(std::abs(fit.a - truth.a) < 1e-4);
}

TEST_CASE("fit errors", "[exponential_fit]") {
    CHECK_THROWS_AS(fit_exponential({{1, 5}, {2, 5}, {3, 5}, {4, 5}}), NonMonotoneInput);
    CHECK_THROWS_AS(fit_exponential({{1, 1}, {2, 2}, {3, 1.5}}), NonMonotoneInput);
    CHECK_THROWS_AS(fit_exponential({{1, 1}, {2, 2}, {3, 4}}), NonDecayingInput);
    CHECK_THROWS_AS(fit_exponential({{1, 1}, {2, 2}, {3, 3}}), NonDecayingInput);
    CHECK_THROWS_AS(fit_exponential({{1, 1}, {2, 2}}), std::invalid_argument);
    CHECK_THROWS_AS(fit_exponential({{1, 1}, {1, 2}, {3, 3}}), std::invalid_argument);
    CHECK_THROWS_AS(fit_exponential({{1, 1}, {2, NAN}, {3, 3}}), std::invalid_argument);
    // both are FitErrors
    CHECK_THROWS_AS(fit_exponential({{1, 5}, {2, 5}, {3, 5}}), FitError);
}
