#include "flatvp/errors.hpp"
#include "flatvp/functionals.hpp"
#include "flatvp/steady_state.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace flatvp;

namespace {

const SteadyState& reference_state()
{
    static const SteadyState ss = solve(CasimirModel::polytrope(0.5), 1.0);
    return ss;
}

}  // namespace

TEST_CASE("converged polytrope is self-consistent")
{
    const auto& ss = reference_state();
    CHECK(ss.residual <= 1e-8);
    CHECK(std::fabs(ss.mass - 1.0) <= 1e-6);
    CHECK(std::fabs(ss.rho0.integral() - 1.0) <= 1e-6);
    CHECK(ss.E0 < 0);
    CHECK(ss.support_radius > 0);
    CHECK(ss.support_radius < ss.grid().r_max());
    CHECK(ss.rho0.values.back() == 0.0);

    const auto image = density_from_potential(ss.inv, ss.E0, ss.U0);
    double rmax = 0, diff = 0;
    for(std::size_t i = 0; i < image.size(); ++i) {
        rmax = std::max(rmax, ss.rho0.values[i]);
        diff = std::max(diff, std::fabs(image.values[i] - ss.rho0.values[i]));
    }
    CHECK(diff / rmax <= 1e-8);

    // U0 is the potential of rho0
    const auto U = potential_from_density(ss.rho0);
    for(std::size_t i = 0; i < U.size(); i += 17)
        CHECK(U.values[i] == doctest::Approx(ss.U0.values[i]).epsilon(1e-12));
    CHECK(support_radius_of(ss.rho0) == ss.support_radius);
    CHECK(ss.support_edge >= ss.support_radius);
}

TEST_CASE("steady-state identities")
{
    const auto& ss = reference_state();
    CHECK(e0_identity_value(ss) == doctest::Approx(ss.E0).epsilon(1e-6));
    const auto rep = evaluate_steady(ss);
    CHECK(rep.all_pass());
    CHECK(rep.d < 0);
    CHECK(std::fabs(2 * rep.e_kin + rep.e_pot) <= 0.01 * std::fabs(rep.e_pot));
    CHECK(rep.e_kin >= 0);
    CHECK(rep.casimir >= 0);
    CHECK(rep.e_pot <= 0);
    CHECK(rep.p == rep.e_kin + rep.casimir);
    CHECK(rep.d == rep.p + rep.e_pot);
}

TEST_CASE("regularity and edge behaviour")
{
    const auto reg = regularity_report(reference_state());
    CHECK(reg.bounded);
    CHECK(reg.identity_defect <= 1e-3);
    CHECK(std::fabs(reg.edge_exponent - 1.5) <= 0.05);
    CHECK(reg.edge_density == 0.0);
}

TEST_CASE("minimality probe")
{
    const auto probe = minimality_probe(reference_state(), 10, 7);
    CHECK(probe.pass);
    CHECK(probe.perturbed.size() == 10);
    for(double m : probe.masses) CHECK(m == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(probe.min_excess >= -1e-9);
}

TEST_CASE("E0 converges under grid refinement")
{
    double e[3];
    for(int k = 0; k < 3; ++k) {
        SolverOptions o;
        o.grid.n = 128u << k;
        e[k] = solve(CasimirModel::polytrope(0.5), 1.0, o).E0;
    }
    const double ratio = (e[0] - e[1]) / (e[1] - e[2]);
    CHECK(ratio > 3.0);
    CHECK(ratio < 5.0);
}

TEST_CASE("mass and shape of another model")
{
    const auto ss = solve(CasimirModel::double_power(0.3, 0.7, 1.0, 0.5), 2.0);
    CHECK(ss.mass == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(ss.E0 < 0);
    CHECK(e0_identity_value(ss) == doctest::Approx(ss.E0).epsilon(1e-6));
    for(std::size_t i = 1; i < ss.rho0.size(); ++i) CHECK(ss.rho0.values[i] <= ss.rho0.values[i - 1]);
}

TEST_CASE("restore_state reproduces a solve")
{
    const auto& ss = reference_state();
    const auto back = restore_state(ss.model(), ss.rho0, ss.E0);
    CHECK(back.mass == doctest::Approx(ss.mass).epsilon(1e-14));
    CHECK(back.support_radius == ss.support_radius);
    for(std::size_t i = 0; i < ss.U0.size(); i += 11) CHECK(back.U0.values[i] == doctest::Approx(ss.U0.values[i]).epsilon(1e-12));
}

TEST_CASE("solver errors")
{
    const auto m = CasimirModel::polytrope(0.5);
    CHECK_THROWS_AS(solve(m, 0.0), InputError);
    CHECK_THROWS_AS(solve(m, -1.0), InputError);

    SolverOptions bad;
    bad.damping = 0;
    CHECK_THROWS_AS(solve(m, 1.0, bad), InputError);

    SolverOptions tiny;
    tiny.grid.r_max = 0.005;   // support radius is about 0.0175
    CHECK_THROWS_AS(solve(m, 1.0, tiny), GridTooSmallError);

    SolverOptions few;
    few.max_iters = 5;
    try {
        solve(m, 1.0, few);
        FAIL("expected ConvergenceError");
    } catch(const GridTooSmallError&) {
        FAIL("wrong error");
    } catch(const ConvergenceError& e) {
        CHECK_FALSE(e.history.empty());
    }
}

TEST_CASE("solves are deterministic")
{
    SolverOptions o;
    o.grid.n = 256;
    const auto a = solve(CasimirModel::polytrope(0.5), 1.0, o);
    const auto b = solve(CasimirModel::polytrope(0.5), 1.0, o);
    CHECK(a.E0 == b.E0);
    CHECK(a.rho0.values == b.rho0.values);
    CHECK(a.U0.values == b.U0.values);
}

TEST_CASE("a tabulated polytrope reproduces the analytic solve")
{
    std::vector<double> f, Q;
    for(int i = 0; i <= 120; ++i) {
        const double x = std::pow(10.0, -4 + 8.0 * i / 120);
        f.push_back(x);
        Q.push_back(x * x * x);
    }
    SolverOptions o;
    o.grid.n = 256;
    const auto tab = solve(CasimirModel::custom(TabulatedCasimir(f, Q), AssumptionConstants{}), 1.0, o);
    const auto ref = solve(CasimirModel::polytrope(0.5), 1.0, o);
    CHECK(tab.E0 == doctest::Approx(ref.E0).epsilon(1e-3));
    CHECK(e0_identity_value(tab) == doctest::Approx(tab.E0).epsilon(1e-6));
}
