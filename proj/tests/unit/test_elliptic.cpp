#include "flatvp/elliptic.hpp"
#include "flatvp/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace flatvp;

namespace {

// Defining integral in t = pi/2 - phi; the integrand peaks at t = 0 with width kp.
double k_quadrature(double xi)
{
    const double kp2 = (1 - xi) * (1 + xi);
    auto f = [&](double t) {
        const double s = std::sin(t);
        return 1 / std::sqrt(kp2 + xi * xi * s * s);
    };
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double split = std::min(std::numbers::pi / 2, 50 * std::sqrt(kp2));
    double v = GK::integrate(f, 0.0, split, 15, 1e-14);
    if(split < std::numbers::pi / 2) v += GK::integrate(f, split, std::numbers::pi / 2, 15, 1e-14);
    return v;
}

}  // namespace

TEST_CASE("K agrees with adaptive quadrature of its integral")
{
    double worst = 0;
    for(int i = 0; i < 100; ++i) {
        const double xi = (1 - 1e-8) * i / 99.0;
        const double ref = k_quadrature(xi);
        worst = std::max(worst, std::fabs(elliptic_k(xi) - ref) / ref);
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("K at zero and the complement form")
{
    CHECK(elliptic_k(0.0) == std::numbers::pi / 2);
    CHECK(elliptic_k_complement(1.0) == std::numbers::pi / 2);
    for(double xi : {0.1, 0.5, 0.9, 0.999}) {
        const double kp = std::sqrt(1 - xi * xi);
        CHECK(elliptic_k_complement(kp) == doctest::Approx(elliptic_k(xi)).epsilon(1e-13));
    }
    // K ~ ln(4/kp) as kp -> 0
    CHECK(elliptic_k_complement(1e-12) == doctest::Approx(std::log(4e12)).epsilon(1e-12));
}

TEST_CASE("K rejects moduli outside [0, 1)")
{
    CHECK_THROWS_AS(elliptic_k(1.0), DomainError);
    CHECK_THROWS_AS(elliptic_k(-0.1), DomainError);
    CHECK_THROWS_AS(elliptic_k(std::nan("")), DomainError);
    CHECK_THROWS_AS(elliptic_k_complement(0.0), DomainError);
}

TEST_CASE("kernel modulus")
{
    CHECK(kernel_modulus(1, 1) == doctest::Approx(1.0));
    CHECK(kernel_modulus(0, 2) == 0.0);
    CHECK(kernel_complement(1, 3) == doctest::Approx(0.5));
    const double m = kernel_modulus(0.3, 1.7), c = kernel_complement(0.3, 1.7);
    CHECK(m * m + c * c == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("logarithmic bound on K")
{
    std::vector<double> xi;
    for(int i = 0; i < 200; ++i) xi.push_back(1 - std::pow(10.0, -8.0 * i / 199.0));
    const auto r = kbound_check(xi, 2.0);
    CHECK(r.pass);
    CHECK(r.max_ratio <= 2.0);
    CHECK(r.max_ratio >= std::numbers::pi / 2 - 1e-12);   // attained at xi = 0
    CHECK_FALSE(kbound_check(xi, 1.0).pass);
}

TEST_CASE("K is increasing and approaches ln(4/kp) near the singular end")
{
    double prev = elliptic_k(0.0);
    for(int i = 1; i <= 400; ++i) {
        const double k = elliptic_k((1 - 1e-9) * i / 400.0);
        CHECK(k > prev);
        prev = k;
    }
    double last = 1;
    for(int k = 4; k <= 10; ++k) {
        const double xi = 1 - std::pow(10.0, -k);
        const double diff = std::fabs(elliptic_k(xi) - std::log(4 / std::sqrt((1 - xi) * (1 + xi))));
        CHECK(diff <= 1e-3);
        CHECK(diff < last);
        last = diff;
    }
}
