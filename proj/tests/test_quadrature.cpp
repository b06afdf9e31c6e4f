#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <numbers>

#include "ifseq/quadrature.hpp"
#include "oracles/oracles.hpp"

using namespace ifseq;

TEST_CASE("Chebyshev-Gauss nodes and weights", "[quadrature]") {
    const auto rule = chebyshev_gauss(5);
    REQUIRE(rule.order() == 5);
    for (std::size_t k = 1; k <= 5; ++k) {
        CHECK(rule.nodes()[k - 1] == Catch::Approx(std::cos((2.0 * k - 1.0) * std::numbers::pi / 10.0)).margin(1e-16));
        CHECK(rule.weights()[k - 1] == 0.2);
    }
    CHECK(rule.nodes()[2] == Catch::Approx(0.0).margin(1e-16));
    CHECK_THROWS_AS(QuadratureRule(0), std::invalid_argument);
}

TEST_CASE("weights sum to one", "[quadrature]") {
    for (std::size_t K : {1u, 2u, 7u, 64u, 1024u, 2048u, 2049u}) {
        const QuadratureRule rule(K);
        double sum = 0.0;
        for (double w : rule.weights()) {
            sum += w;
        }
        CHECK(std::abs(sum - 1.0) <= static_cast<double>(K) * std::numeric_limits<double>::epsilon());
    }
}

TEST_CASE("end distances of the nodes are accurate", "[quadrature]") {
    const QuadratureRule rule(2048);
    for (const auto& p : rule.points()) {
        CHECK(p.one_plus + p.one_minus == Catch::Approx(2.0).epsilon(1e-15));
        CHECK(p.one_plus > 0.0);
        CHECK(p.one_minus > 0.0);
    }
    // 1 - cos(theta) = 2 sin^2(theta / 2) keeps full relative accuracy at the ends.
    const double theta = std::numbers::pi / 4096.0;
    CHECK(rule.points().front().one_minus == Catch::Approx(2.0 * std::pow(std::sin(theta / 2.0), 2)).epsilon(1e-15));
}

TEST_CASE("monomials are integrated exactly up to degree 2K - 1", "[quadrature]") {
    for (std::size_t K : {1u, 3u, 8u, 20u}) {
        const QuadratureRule rule(K);
        for (unsigned p = 0; p <= 2 * K - 1; ++p) {
            double sum = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                sum += rule.weights()[k] * std::pow(rule.nodes()[k], p);
            }
            INFO("K = " << K << ", p = " << p);
            CHECK(std::abs(sum - oracle::chebyshev_moment(p)) <= 1e-14);
        }
        // and not beyond: x^2K carries 2^(1-2K) T_2K, and the rule sees T_2K as -1
        double sum = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            sum += rule.weights()[k] * std::pow(rule.nodes()[k], 2 * K);
        }
        const double expected_error = -std::ldexp(1.0, 1 - 2 * static_cast<int>(K));
        CHECK(sum - oracle::chebyshev_moment(2 * K) == Catch::Approx(expected_error).epsilon(1e-3));
    }
}
