#include "flatvp/errors.hpp"
#include "flatvp/parallel.hpp"
#include "flatvp/rng.hpp"
#include "flatvp/stability_sim.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

using namespace flatvp;
using std::numbers::pi;

namespace {

const SteadyState& state()
{
    static const SteadyState ss = solve(CasimirModel::polytrope(0.5), 1.0);
    return ss;
}

const ParticleEnsemble& million()
{
    static const ParticleEnsemble ens = sample(state(), 1000000, 11);
    return ens;
}

ParticleEnsemble pair(double d, double w, double v)
{
    ParticleEnsemble e;
    e.resize(2);
    e.x1 = {-d / 2, d / 2};
    e.v2 = {-v, v};
    e.w = {w, w};
    return e;
}

ParticleEnsemble random_cloud(std::size_t n, std::uint64_t seed)
{
    ParticleEnsemble e;
    e.resize(n);
    for(std::size_t i = 0; i < n; ++i) {
        CounterRng rng(seed, i);
        e.x1[i] = rng.uniform() - 0.5;
        e.x2[i] = rng.uniform() - 0.5;
        e.v1[i] = 0.3 * (rng.uniform() - 0.5);
        e.v2[i] = 0.3 * (rng.uniform() - 0.5);
        e.w[i] = (0.5 + rng.uniform()) / n;
    }
    return e;
}

}  // namespace

TEST_CASE("softened pair forces")
{
    const double d = 0.3, eps = 0.05;
    ParticleEnsemble e = pair(d, 1.0, 0.0);
    e.w = {0.7, 0.7};
    std::vector<double> a1, a2;
    ForceField::direct(eps).accelerations(e, a1, a2);
    const double mag = 0.7 * d / std::pow(d * d + eps * eps, 1.5);
    CHECK(a1[0] == doctest::Approx(mag).epsilon(1e-14));
    CHECK(a1[1] == doctest::Approx(-mag).epsilon(1e-14));
    CHECK(a1[0] == -a1[1]);
    CHECK(a2[0] == 0.0);
    CHECK(a2[1] == 0.0);
}

TEST_CASE("a single particle streams freely")
{
    ParticleEnsemble e;
    e.resize(1);
    e.x1[0] = 0.25;
    e.x2[0] = -0.5;
    e.v1[0] = 1.5;
    e.v2[0] = 0.125;
    e.w[0] = 2.0;
    std::vector<double> a1, a2;
    const auto field = ForceField::direct(0.01);
    field.accelerations(e, a1, a2);
    CHECK(a1[0] == 0.0);
    CHECK(a2[0] == 0.0);
    const double dt = 0.01;
    const double x1 = e.x1[0] + e.v1[0] * dt, x2 = e.x2[0] + e.v2[0] * dt;
    step(e, dt, field);
    CHECK(e.x1[0] == x1);
    CHECK(e.x2[0] == x2);
    CHECK(e.v1[0] == 1.5);
    CHECK(e.time == dt);
}

TEST_CASE("leapfrog is time reversible")
{
    ParticleEnsemble e = random_cloud(200, 3);
    const auto start = e;
    Leapfrog lf(ForceField::direct(0.05), e);
    for(int k = 0; k < 10; ++k) lf.step(1e-3);
    for(int k = 0; k < 10; ++k) lf.step(-1e-3);
    double worst = 0;
    for(std::size_t i = 0; i < e.size(); ++i) {
        worst = std::max({worst, std::fabs(e.x1[i] - start.x1[i]), std::fabs(e.x2[i] - start.x2[i]),
                          std::fabs(e.v1[i] - start.v1[i]), std::fabs(e.v2[i] - start.v2[i])});
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("softened circular orbit keeps its radius")
{
    // each particle circles the centre at d/2: v^2 / (d/2) = w d / (d^2 + eps^2)^{3/2}
    const double d = 1.0, eps = 0.1, w = 1.0;
    const double v = std::sqrt(w * d * d / (2 * std::pow(d * d + eps * eps, 1.5)));
    const double period = 2 * pi * (d / 2) / v;
    ParticleEnsemble e = pair(d, w, v);
    Leapfrog lf(ForceField::direct(eps), e);
    double worst = 0;
    for(int k = 0; k < 1000; ++k) {
        lf.step(period / 1000);
        const double sep = std::sqrt(std::pow(e.x1[1] - e.x1[0], 2) + std::pow(e.x2[1] - e.x2[0], 2));
        worst = std::max(worst, std::fabs(sep - d) / d);
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("direct sum conserves momentum and angular momentum")
{
    ParticleEnsemble e = random_cloud(300, 8);
    auto momentum = [&](const ParticleEnsemble& s) {
        double p1 = 0, p2 = 0, scale = 0;
        for(std::size_t i = 0; i < s.size(); ++i) {
            p1 += s.w[i] * s.v1[i];
            p2 += s.w[i] * s.v2[i];
            scale += s.w[i] * std::sqrt(s.v1[i] * s.v1[i] + s.v2[i] * s.v2[i]);
        }
        return std::array<double, 3>{p1, p2, scale};
    };
    const auto p0 = momentum(e);
    const double L0 = e.angular_momentum(), Labs = e.angular_momentum_abs();
    Leapfrog lf(ForceField::direct(0.02), e);
    for(int k = 0; k < 100; ++k) lf.step(2e-3);
    const auto p1 = momentum(e);
    CHECK(std::fabs(p1[0] - p0[0]) <= 1e-10 * p0[2]);
    CHECK(std::fabs(p1[1] - p0[1]) <= 1e-10 * p0[2]);
    CHECK(std::fabs(e.angular_momentum() - L0) <= 1e-10 * Labs);
}

TEST_CASE("a non-finite coordinate is reported with its index")
{
    ParticleEnsemble e = random_cloud(10, 1);
    e.v1[4] = std::numeric_limits<double>::infinity();
    try {
        step(e, 1e-3, ForceField::direct(0.05));
        FAIL("expected NonFiniteError");
    } catch(const NonFiniteError& err) {
        CHECK(err.index == 4);
    }
}

TEST_CASE("sampling f0")
{
    const auto& ss = state();
    const std::size_t N = 100000;
    const auto e = sample(ss, N, 4);
    REQUIRE(e.size() == N);
    CHECK(e.total_mass() == doctest::Approx(ss.mass).epsilon(1e-12));
    CHECK(radial_ks_distance(ss, e) < 2 / std::sqrt(static_cast<double>(N)));

    // every particle is bound below the cutoff energy
    const RadialForceSpline spline(ss.grid(), ss.U0.values, ss.mass / (ss.grid().r_max() * ss.grid().r_max()));
    std::size_t unbound = 0;
    double sum = 0, sum2 = 0;
    for(std::size_t i = 0; i < N; ++i) {
        const double r = std::sqrt(e.x1[i] * e.x1[i] + e.x2[i] * e.x2[i]);
        const double k = 0.5 * (e.v1[i] * e.v1[i] + e.v2[i] * e.v2[i]);
        if(!(k + ss.U0.at(r) < ss.E0)) ++unbound;
        sum += k;
        sum2 += k * k;
    }
    CHECK(unbound == 0);

    // mean kinetic energy per unit mass within 3 sigma of the steady value
    const double mean = sum / N, sigma = std::sqrt((sum2 / N - mean * mean) / N);
    const double expected = evaluate_steady(ss).e_kin / ss.mass;
    CHECK(std::fabs(mean - expected) <= 3 * sigma);

    // same seed, same particles
    const auto again = sample(ss, 1000, 4);
    for(std::size_t i = 0; i < 1000; ++i) CHECK(again.x1[i] == e.x1[i]);
}

TEST_CASE("grid accelerations follow the steady field")
{
    const auto& ss = state();
    const auto& e = million();
    SimConfig cfg;
    const auto field = ForceField::grid(force_operator(ss, cfg.resolve(ss)));
    std::vector<double> a1, a2;
    field.accelerations(e, a1, a2);
    const RadialForceSpline spline(ss.grid(), ss.U0.values, ss.mass / (ss.grid().r_max() * ss.grid().r_max()));
    double num = 0, den = 0;
    for(std::size_t i = 0; i < e.size(); ++i) {
        const double r = std::sqrt(e.x1[i] * e.x1[i] + e.x2[i] * e.x2[i]);
        const double ref = -spline.slope(r);
        const double ar = (a1[i] * e.x1[i] + a2[i] * e.x2[i]) / r;
        num += (ar - ref) * (ar - ref);
        den += ref * ref;
    }
    CHECK(std::sqrt(num / den) <= 0.02);
}

TEST_CASE("grid and direct sum agree on the RMS acceleration")
{
    const auto& ss = state();
    const auto& e = million();
    const auto cfg = SimConfig{}.resolve(ss);
    std::vector<double> a1, a2;
    ForceField::grid(force_operator(ss, cfg)).accelerations(e, a1, a2);

    // direct softened sum over all sources for a subset of targets
    const double eps2 = cfg.eps_soft * cfg.eps_soft;
    const std::size_t targets = 500, stride = e.size() / targets;
    std::vector<double> grid_sq(targets), direct_sq(targets);
    parallel_chunks(targets, 1, [&](std::size_t, std::size_t b, std::size_t) {
        const std::size_t t = b * stride;
        double s1 = 0, s2 = 0;
        for(std::size_t j = 0; j < e.size(); ++j) {
            const double dx = e.x1[j] - e.x1[t], dy = e.x2[j] - e.x2[t];
            const double r2 = dx * dx + dy * dy + eps2;
            const double f = e.w[j] / (r2 * std::sqrt(r2));
            s1 += f * dx;
            s2 += f * dy;
        }
        direct_sq[b] = s1 * s1 + s2 * s2;
        grid_sq[b] = a1[t] * a1[t] + a2[t] * a2[t];
    });
    double g = 0, d = 0;
    for(std::size_t b = 0; b < targets; ++b) {
        g += grid_sq[b];
        d += direct_sq[b];
    }
    CHECK(std::fabs(std::sqrt(g / d) - 1) <= 0.05);
}

TEST_CASE("ensemble functionals of a large sample")
{
    const auto& ss = state();
    const auto& e = million();
    const auto ref = evaluate_steady(ss);
    const auto est = evaluate_ensemble(ss.model(), e, *ss.op);
    CHECK(std::fabs(est.e_kin / ref.e_kin - 1) <= 0.02);
    CHECK(std::fabs(est.e_pot / ref.e_pot - 1) <= 0.02);
    CHECK(std::fabs(est.casimir / ref.casimir - 1) <= 0.02);
    CHECK(std::fabs(est.d / ref.d - 1) <= 0.02);

    const auto dist = stability_distance(ss, e);
    CHECK(dist.d >= -dist.eps_mc);
    CHECK(std::fabs(dist.d) <= dist.eps_mc);
    CHECK(std::fabs(dist.epot_diff) <= 0.01 * std::fabs(ref.e_pot));

    // a heated copy sits farther from f0 on its support
    auto hot = e;
    Perturbation{Perturbation::Kind::Velocity, 0.3}.apply(hot, ss.support_radius);
    const auto far = stability_distance(ss, hot);
    CHECK(dist.l2_support >= 0);
    CHECK(far.l2_support > 2 * dist.l2_support);
}

TEST_CASE("perturbations")
{
    const auto& ss = state();
    auto e = sample(ss, 5000, 2);
    const auto base = e;
    Perturbation{Perturbation::Kind::Velocity, 0.1}.apply(e, ss.support_radius);
    for(std::size_t i = 0; i < e.size(); i += 97) {
        CHECK(e.v1[i] == doctest::Approx(1.1 * base.v1[i]).epsilon(1e-15));
        CHECK(e.x1[i] == base.x1[i]);
    }
    auto r = base;
    Perturbation{Perturbation::Kind::Radial, 0.2}.apply(r, ss.support_radius);
    CHECK(r.total_mass() == doctest::Approx(base.total_mass()).epsilon(1e-13));
    CHECK(r.w != base.w);
    auto n = base;
    Perturbation{}.apply(n, ss.support_radius);
    CHECK(n.w == base.w);
}

TEST_CASE("configuration defaults and errors")
{
    const auto& ss = state();
    const auto cfg = SimConfig{}.resolve(ss);
    const double t_dyn = 2 * pi * std::sqrt(std::pow(ss.support_radius, 3) / ss.mass);
    CHECK(dynamical_time(ss) == doctest::Approx(t_dyn).epsilon(1e-15));
    CHECK(cfg.dt == doctest::Approx(t_dyn / 200).epsilon(1e-15));
    CHECK(cfg.t_end == doctest::Approx(10 * t_dyn).epsilon(1e-15));
    CHECK(cfg.eps_soft == doctest::Approx(0.01 * ss.support_radius).epsilon(1e-15));

    SimConfig bad;
    bad.dt = -1;
    CHECK_THROWS_AS(bad.validate(), InputError);
    SimConfig big;
    big.method = ForceMethod::DirectSum;
    big.N = 200000;
    CHECK_THROWS_AS(big.validate(), InputError);
    CHECK(force_method_from_string("direct") == ForceMethod::DirectSum);
    CHECK_THROWS_AS(force_method_from_string("tree"), InputError);
}

TEST_CASE("runs are identical across thread counts")
{
    const auto& ss = state();
    SimConfig cfg;
    cfg.N = 20000;
    cfg.t_end = 0.5 * dynamical_time(ss);
    cfg.cadence = 25;
    auto csv = [&](unsigned threads) {
        set_num_threads(threads);
        const auto out = run(ss, cfg, {});
        std::ostringstream os;
        write_timeseries_header(os);
        for(const auto& row : out.rows) write_timeseries_row(os, row);
        return os.str();
    };
    const std::string one = csv(1), four = csv(4), again = csv(4);
    set_num_threads(1);
    CHECK(one == four);
    CHECK(four == again);
    CHECK(one.find("t,e_kin,e_pot,casimir,D,d_dist,epot_diff,L3,max_r") == 0);
}

TEST_CASE("short baseline run stays near the steady state")
{
    const auto& ss = state();
    SimConfig cfg;
    cfg.N = 50000;
    cfg.t_end = 2 * dynamical_time(ss);
    const auto out = run(ss, cfg, {});
    CHECK(out.rows.size() >= 3);
    CHECK(out.D_drift <= 0.02);
    CHECK(out.L3_drift <= 1e-6);
    CHECK(out.d_nonnegative);
    CHECK(out.escaped == 0);
    CHECK(out.rows.front().t == 0.0);
    CHECK(out.rows.back().t == doctest::Approx(cfg.t_end).epsilon(1e-12));
}
