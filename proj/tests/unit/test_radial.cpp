#include "flatvp/errors.hpp"
#include "flatvp/radial.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace flatvp;

TEST_CASE("grid construction")
{
    const auto u = RadialGrid::uniform(17, 2.0);
    CHECK(u.size() == 17);
    CHECK(u.r(0) == 0.0);
    CHECK(u.r_max() == 2.0);

    const auto h = RadialGrid::hybrid(128, 0.1, 10.0);
    CHECK(h.r(0) == 0.0);
    CHECK(h.r_max() == doctest::Approx(10.0).epsilon(1e-14));
    for(std::size_t i = 1; i < h.size(); ++i) CHECK(h.r(i) > h.r(i - 1));

    const auto l = RadialGrid::logarithmic(64, 1e-3, 1.0);
    CHECK(l.r(0) == 0.0);
    CHECK(l.r(1) == doctest::Approx(1e-3));

    CHECK_THROWS_AS(RadialGrid::uniform(8, 1.0), InputError);
    CHECK_THROWS_AS(RadialGrid::from_nodes({0, 1, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14}), InputError);
}

TEST_CASE("node areas integrate piecewise-linear functions exactly")
{
    const auto g = RadialGrid::hybrid(64, 0.2, 3.0);
    double total = 0;
    for(double a : g.areas()) total += a;
    CHECK(total == doctest::Approx(std::numbers::pi * 9).epsilon(1e-13));

    std::vector<double> v(g.size());
    for(std::size_t i = 0; i < g.size(); ++i) v[i] = 3.0 - g.r(i);   // linear: 2 pi int r (3 - r) dr = 9 pi
    const RadialProfile p(g, v);
    CHECK(p.integral() == doctest::Approx(9 * std::numbers::pi).epsilon(1e-13));
    CHECK(p.at(1.234) == doctest::Approx(3 - 1.234).epsilon(1e-14));
    CHECK(p.at(3.5) == 0.0);
}

TEST_CASE("locate and scaling")
{
    const auto g = RadialGrid::hybrid(200, 0.05, 4.0);
    for(double r : {0.0, 1e-4, 0.05, 0.9, 3.99999}) {
        const auto i = g.locate(r);
        REQUIRE(i != RadialGrid::npos);
        CHECK(g.r(i) <= r);
        CHECK(r < g.r(i + 1));
    }
    CHECK(g.locate(4.0) == RadialGrid::npos);
    CHECK(g.locate(-1.0) == RadialGrid::npos);

    const auto s = g.scaled(2.5);
    CHECK(s.r(17) == doctest::Approx(2.5 * g.r(17)).epsilon(1e-15));
    CHECK(s.hash() != g.hash());
    CHECK(g.hash() == RadialGrid::hybrid(200, 0.05, 4.0).hash());
}

TEST_CASE("profile csv round trip is exact")
{
    const auto g = RadialGrid::hybrid(40, 0.3, 7.0);
    std::vector<double> v(40);
    for(std::size_t i = 0; i < 40; ++i) v[i] = std::sin(g.r(i)) / 3;
    std::stringstream ss;
    write_profile_csv(ss, {g, v}, {"note"});
    CHECK(ss.str().rfind("# note\n", 0) == 0);
    const auto back = read_profile_csv(ss);
    REQUIRE(back.size() == 40);
    for(std::size_t i = 0; i < 40; ++i) {
        CHECK(back.grid.r(i) == g.r(i));
        CHECK(back.values[i] == v[i]);
    }
}
