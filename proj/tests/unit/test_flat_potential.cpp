#include "flatvp/errors.hpp"
#include "flatvp/flat_potential.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace flatvp;
using std::numbers::pi;

namespace {

RadialProfile kuzmin(std::size_t n)
{
    const auto g = RadialGrid::hybrid(n, 1.0, 1e4);
    std::vector<double> rho(n);
    for(std::size_t i = 0; i < n; ++i) rho[i] = 1 / (2 * pi * std::pow(g.r(i) * g.r(i) + 1, 1.5));
    return {g, rho};
}

double kuzmin_error(std::size_t n)
{
    const auto rho = kuzmin(n);
    const auto U = potential_from_density(rho);
    double worst = 0;
    for(std::size_t i = 0; i < n && rho.grid.r(i) <= 10; ++i) {
        const double ex = -1 / std::sqrt(rho.grid.r(i) * rho.grid.r(i) + 1);
        worst = std::max(worst, std::fabs(U.values[i] - ex) / std::fabs(ex));
    }
    return worst;
}

}  // namespace

TEST_CASE("Kuzmin disc potential converges at second order")
{
    const double e512 = kuzmin_error(512), e1024 = kuzmin_error(1024);
    CHECK(e512 <= 1e-3);
    CHECK(e512 / e1024 >= 4.0);
}

TEST_CASE("central potential of a uniform disc with a linear rim")
{
    // k(0, s) = 2 pi, so U(0) = -2 pi int rho ds: for Sigma0 on [0, a] ramping to 0 at a + h
    // this is -2 pi Sigma0 (a + h/2). The nodal value averages over the first cell, O(h^2).
    const double a = 1.25, sigma = 0.7;
    auto error = [&](std::size_t n) {
        const auto g = RadialGrid::uniform(n, 2.0);
        const double h = 2.0 / (n - 1);
        std::vector<double> rho(n, 0.0);
        for(std::size_t i = 0; i < n; ++i)
            if(g.r(i) <= a + 1e-12) rho[i] = sigma;
        const double exact = -2 * pi * sigma * (a + h / 2);
        return std::fabs(potential_from_density({g, rho}).values[0] - exact) / std::fabs(exact);
    };
    const double e1 = error(161), e2 = error(321);
    CHECK(e1 <= 2e-5);
    CHECK(e1 / e2 >= 3.5);
}

TEST_CASE("operator symmetry, scaling and bilinearity")
{
    const auto g = RadialGrid::hybrid(96, 0.1, 5.0);
    const auto op = KernelOperator::assemble(g);
    double asym = 0, scale = 0;
    for(std::size_t i = 0; i < g.size(); ++i)
        for(std::size_t j = 0; j < g.size(); ++j) {
            asym = std::max(asym, std::fabs(op.entry(i, j) - op.entry(j, i)) / std::fabs(op.entry(i, i)));
        }
    CHECK(asym <= 1e-13);

    const auto direct = KernelOperator::assemble(g.scaled(3.0));
    const auto scaled = op.scaled(3.0);
    for(std::size_t i = 0; i < g.size(); i += 7)
        for(std::size_t j = 0; j < g.size(); j += 5)
            scale = std::max(scale, std::fabs(direct.entry(i, j) - scaled.entry(i, j)) / std::fabs(direct.entry(i, i)));
    CHECK(scale <= 1e-10);

    std::vector<double> r1(g.size()), r2(g.size()), sum(g.size());
    for(std::size_t i = 0; i < g.size(); ++i) {
        r1[i] = std::exp(-g.r(i) * g.r(i));
        r2[i] = 1 / (1 + g.r(i));
        sum[i] = r1[i] + 2.5 * r2[i];
    }
    const double lhs = op.potential_energy(sum);
    const double rhs = op.potential_energy(r1) + 6.25 * op.potential_energy(r2) - 2.5 * op.interaction(r1, r2);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
    CHECK(op.interaction(r1, r2) == doctest::Approx(op.interaction(r2, r1)).epsilon(1e-13));
    CHECK(op.potential_energy(r1) < 0);

    // sum A rho1 U[rho2] = -rho1^T S rho2
    const auto U2 = op.potential(r2);
    double pair = 0;
    for(std::size_t i = 0; i < g.size(); ++i) pair += g.areas()[i] * r1[i] * U2[i];
    CHECK(pair == doctest::Approx(-op.interaction(r1, r2)).epsilon(1e-12));
}

TEST_CASE("potential is monotone and approaches the point-mass field")
{
    const auto rho = kuzmin(512);
    const auto U = potential_from_density(rho);
    for(std::size_t i = 1; i < U.size(); ++i) CHECK(U.values[i] >= U.values[i - 1]);
    const double M = rho.integral();
    const double r = 500;
    CHECK(U.at(r) == doctest::Approx(-M / r).epsilon(1e-3));
}

TEST_CASE("norms and enclosed mass")
{
    const auto rho = kuzmin(1024);
    for(double p : {1.0, 4.0 / 3.0, 3.0}) {
        // 2 pi int r (2 pi)^{-p} (1 + r^2)^{-3p/2} dr = 2 pi (2 pi)^{-p} / (3p - 2)
        const double exact = std::pow(2 * pi * std::pow(2 * pi, -p) / (3 * p - 2), 1 / p);
        CHECK(lp_norm(rho, p) == doctest::Approx(exact).epsilon(p == 1.0 ? 1e-3 : 1e-5));
    }
    CHECK(mass_inside(rho, 1.0) == doctest::Approx(1 - 1 / std::sqrt(2.0)).epsilon(1e-5));
    CHECK(mass_inside(rho, rho.grid.r_max()) == doctest::Approx(rho.integral()).epsilon(1e-14));

    // linear density: mass_inside is exact
    const auto g = RadialGrid::uniform(32, 1.0);
    std::vector<double> lin(32);
    for(std::size_t i = 0; i < 32; ++i) lin[i] = 1 - g.r(i);
    const double R = 0.55;
    CHECK(mass_inside({g, lin}, R) == doctest::Approx(2 * pi * (R * R / 2 - R * R * R / 3)).epsilon(1e-13));
}

TEST_CASE("outer energy decays with R")
{
    const auto rho = kuzmin(1024);
    const auto U = potential_from_density(rho);
    const std::vector<double> radii = {4, 8, 16, 32};
    const auto fit = fit_outer_decay(rho, U, radii);
    CHECK(fit.exponent <= -0.5);
    for(std::size_t i = 1; i < radii.size(); ++i) CHECK(fit.outer_energy[i] < fit.outer_energy[i - 1]);

    const auto rep = outer_potential_energy(rho, U, 8.0, 10.0);
    CHECK(rep.outer_energy > 0);
    CHECK(rep.bound_holds == (rep.implied_constant <= 10.0));
    CHECK(outer_potential_energy(rho, U, 8.0, rep.implied_constant * (1 + 1e-9)).bound_holds);
    CHECK_THROWS_AS(outer_potential_energy(rho, U, 0.0, 1.0), InputError);
    CHECK_THROWS_AS(outer_potential_energy(rho, U, 2e4, 1.0), InputError);
}

TEST_CASE("negative densities are rejected")
{
    const auto g = RadialGrid::uniform(32, 1.0);
    std::vector<double> rho(32, 1.0);
    rho[5] = -1e-3;
    CHECK_THROWS_AS(potential_from_density({g, rho}), InputError);
}

TEST_CASE("far field and sign of a compact density")
{
    const auto g = RadialGrid::hybrid(512, 0.05, 60.0);
    std::vector<double> rho(g.size(), 0.0);
    for(std::size_t i = 0; i < g.size(); ++i)
        if(g.r(i) < 1) rho[i] = std::pow(1 - g.r(i) * g.r(i), 2);
    const RadialProfile p(g, rho);
    const double M = p.integral();
    const auto U = potential_from_density(p);
    for(double u : U.values) CHECK(u < 0);
    CHECK(std::fabs(50 * U.at(50.0) + M) <= 0.01 * M);
}
