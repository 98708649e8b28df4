#include "flatvp/casimir.hpp"
#include "flatvp/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

using namespace flatvp;

namespace {

double integrate(const std::function<double(double)>& f, double a, double b)
{
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-14);
}

}  // namespace

TEST_CASE("polytrope values")
{
    const auto m = CasimirModel::polytrope(0.5);
    CHECK(m.Q(2.0) == doctest::Approx(8.0));
    CHECK(m.dQ(2.0) == doctest::Approx(12.0));
    CHECK(m.d2Q(2.0) == doctest::Approx(12.0));
    CHECK(m.dQ(0.0) == 0.0);
    CHECK(m.alpha() == doctest::Approx(2.0));

    const InverseQ inv(m);
    CHECK(inv.q(3.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(inv.q(0.0) == 0.0);
    CHECK(inv.q(-1.0) == 0.0);
}

TEST_CASE("q inverts Q' and the closed form matches the root finder")
{
    for(double mu : {0.3, 0.5, 0.8}) {
        const InverseQ inv(CasimirModel::polytrope(mu, 1.7));
        for(double e : {1e-6, 0.01, 0.7, 5.0, 300.0}) {
            const double f = inv.q(e);
            CHECK(inv.model().dQ(f) == doctest::Approx(e).epsilon(1e-12));
            CHECK(inv.q_root_find(e) == doctest::Approx(f).epsilon(1e-10));
        }
    }
}

TEST_CASE("energy moments of q against quadrature")
{
    const std::vector<CasimirModel> models = {CasimirModel::polytrope(0.5), CasimirModel::polytrope(0.7, 2.0),
                                              CasimirModel::double_power(0.4, 0.8, 1.0, 0.5)};
    for(const auto& m : models) {
        const InverseQ inv(m);
        const double s = 2.3;
        auto q = [&](double t) { return inv.q_root_find(t); };
        CHECK(inv.q_antiderivative(s) == doctest::Approx(integrate(q, 0, s)).epsilon(1e-9));
        CHECK(inv.kinetic_moment(s) == doctest::Approx(integrate([&](double t) { return (s - t) * q(t); }, 0, s))
                                           .epsilon(1e-9));
        CHECK(inv.energy_moment(s) == doctest::Approx(integrate([&](double t) { return t * q(t); }, 0, s))
                                          .epsilon(1e-9));
        CHECK(inv.casimir_moment(s) == doctest::Approx(integrate([&](double t) { return m.Q(q(t)); }, 0, s))
                                           .epsilon(1e-9));
        CHECK(inv.casimir_moment_scaled(s, 1.6) ==
              doctest::Approx(integrate([&](double t) { return m.Q(1.6 * q(t)); }, 0, s)).epsilon(1e-9));
        CHECK(inv.q_antiderivative(-1) == 0.0);
    }
}

TEST_CASE("structural assumptions hold for the built-in models")
{
    const auto grid = default_f_grid(1.0);
    CHECK(grid.size() == 401);
    CHECK(grid.front() == 0.0);
    CHECK(validate_assumptions(CasimirModel::polytrope(0.5), grid).all_pass());
    CHECK(validate_assumptions(CasimirModel::double_power(0.3, 0.6, 1.0, 1.0), grid).all_pass());
}

TEST_CASE("wrong declared constants are reported")
{
    const auto grid = default_f_grid(1.0);
    auto m = CasimirModel::polytrope(0.5);
    auto d = m.declared();
    d.C1 = 2.0;   // Q1 demands Q >= 2 f^3
    const auto rep = validate_assumptions(m.with_declared(d), grid);
    CHECK_FALSE(rep.all_pass());
    REQUIRE(rep.find("Q1") != nullptr);
    CHECK_FALSE(rep.find("Q1")->pass);
}

TEST_CASE("tabulated Casimir")
{
    std::vector<double> f, Q, bad;
    for(int i = 0; i <= 60; ++i) {
        const double x = std::pow(10.0, -3 + 5.0 * i / 60);
        f.push_back(x);
        Q.push_back(x * x * x);
        bad.push_back(i % 2 ? x * x * x : 1.5 * x * x * x);
    }
    const TabulatedCasimir tab(f, Q);
    CHECK(tab.derivative_monotone());
    CHECK(tab.Q(0.37) == doctest::Approx(0.37 * 0.37 * 0.37).epsilon(1e-3));
    CHECK(tab.dQ(0.37) == doctest::Approx(3 * 0.37 * 0.37).epsilon(1e-2));
    CHECK(tab.lower_exponent() == doctest::Approx(3.0).epsilon(1e-6));

    AssumptionConstants decl;
    const auto good = CasimirModel::custom(tab, decl);
    CHECK(validate_assumptions(good, default_f_grid(1.0)).find("Q4")->pass);
    CHECK(InverseQ(good).q(3.0) == doctest::Approx(1.0).epsilon(1e-2));

    const auto wiggly = CasimirModel::custom(TabulatedCasimir(f, bad), decl);
    CHECK_FALSE(validate_assumptions(wiggly, default_f_grid(1.0)).find("Q4")->pass);
    CHECK_THROWS_AS(InverseQ{wiggly}, ModelDefinitionError);
}

TEST_CASE("invalid parameters")
{
    CHECK_THROWS_AS(CasimirModel::polytrope(0.0), InputError);
    CHECK_THROWS_AS(CasimirModel::polytrope(1.0), InputError);
    CHECK_THROWS_AS(CasimirModel::polytrope(0.5, -1.0), InputError);
    CHECK_THROWS_AS(CasimirModel::double_power(0.6, 0.4, 1, 1), InputError);
}

TEST_CASE("q round trip, monotonicity and convexity of G")
{
    const std::vector<CasimirModel> models = {CasimirModel::polytrope(0.5), CasimirModel::polytrope(0.2, 3.0),
                                              CasimirModel::double_power(0.4, 0.8, 1.0, 0.5)};
    for(const auto& m : models) {
        const InverseQ inv(m);
        for(int i = 0; i < 200; ++i) {
            const double f = std::pow(10.0, -8 + 11.0 * i / 199);
            CHECK(std::fabs(inv.q(m.dQ(f)) - f) <= 1e-10 * (1 + f));
        }
        double prev = 0;
        for(int i = 1; i <= 100; ++i) {
            const double e = 1e-3 * std::pow(1.1, i);
            CHECK(inv.q(e) > prev);
            prev = inv.q(e);
            const double h = 1e-3 * e;
            const double g2 = inv.q_antiderivative(e + h) - 2 * inv.q_antiderivative(e) + inv.q_antiderivative(e - h);
            CHECK(g2 >= -1e-12 * inv.q_antiderivative(e));
        }
    }
}

TEST_CASE("polytrope q matches the closed form")
{
    // Q = c f^{1+1/mu}: Q'(f) = c (1 + 1/mu) f^{1/mu}, so q(e) = (mu e / (c (mu + 1)))^mu
    for(double mu : {0.25, 0.5, 0.9}) {
        const double c = 1.3;
        const InverseQ inv(CasimirModel::polytrope(mu, c));
        for(int i = 0; i < 50; ++i) {
            const double e = std::pow(10.0, -4 + 7.0 * i / 49);
            const double exact = std::pow(mu * e / (c * (mu + 1)), mu);
            CHECK(inv.q_root_find(e) == doctest::Approx(exact).epsilon(1e-10));
            CHECK(inv.q(e) == doctest::Approx(exact).epsilon(1e-12));
        }
    }
}

TEST_CASE("tabulated Q' is the derivative of tabulated Q")
{
    auto table = [](int per_decade) {
        std::vector<double> f, Q;
        for(int i = 0; i <= 4 * per_decade; ++i) {
            const double x = std::pow(10.0, -2 + static_cast<double>(i) / per_decade);
            f.push_back(x);
            Q.push_back(x * x * (1 + x));
        }
        return std::make_pair(TabulatedCasimir(f, Q), Q);
    };
    const auto [tab, Q] = table(10);
    for(double x : {0.005, 0.0137, 0.5, 3.3, 99.0, 250.0}) {
        const double h = 1e-6 * x;
        CHECK((tab.Q(x + h) - tab.Q(x - h)) / (2 * h) == doctest::Approx(tab.dQ(x)).epsilon(1e-7));
        CHECK((tab.dQ(x + h) - tab.dQ(x - h)) / (2 * h) == doctest::Approx(tab.d2Q(x)).epsilon(1e-5));
    }
    // Q departs from the table values by the interpolation error of Q'
    auto worst = [](const TabulatedCasimir& t, const std::vector<double>& q) {
        double w = 0;
        for(std::size_t i = 0; i < q.size(); ++i) w = std::max(w, std::fabs(t.Q(t.f_nodes()[i]) / q[i] - 1));
        return w;
    };
    const auto [fine, Qf] = table(20);
    const double coarse_dev = worst(tab, Q), fine_dev = worst(fine, Qf);
    CHECK(coarse_dev <= 5e-3);
    CHECK(fine_dev * 3 <= coarse_dev);
}
