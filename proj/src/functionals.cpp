#include "flatvp/functionals.hpp"
#include "flatvp/errors.hpp"
#include "flatvp/parallel.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <utility>

namespace flatvp {

namespace {

constexpr double two_pi = 2 * std::numbers::pi;

boost::math::quadrature::tanh_sinh<double>& w_integrator()
{
    thread_local boost::math::quadrature::tanh_sinh<double> ts;
    return ts;
}

/// int_0^top g(w) dw, 0 for top <= 0.
template<class F>
double integrate_w(F g, double top)
{
    if(!(top > 0)) return 0.0;
    return w_integrator().integrate(g, 0.0, double(top), 1e-13);
}

double sum_areas(std::span<const double> A, std::span<const double> v)
{
    std::vector<double> t(v.size());
    for(std::size_t i = 0; i < v.size(); ++i) t[i] = A[i] * v[i];
    return pairwise_sum(t.data(), t.size());
}

}  // namespace

FunctionalReport FunctionalReport::from_parts(double mass, double e_kin, double e_pot, double casimir,
                                              std::string method)
{
    FunctionalReport r;
    r.mass = mass;
    r.e_kin = e_kin;
    r.e_pot = e_pot;
    r.casimir = casimir;
    r.p = e_kin + casimir;
    r.d = r.p + e_pot;
    r.method = std::move(method);
    return r;
}

bool FunctionalReport::all_pass() const
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

FunctionalReport nodal_functionals(const InverseQ& inv, std::span<const double> eps, std::span<const double> rho,
                                   const KernelOperator& op)
{
    const std::size_t n = op.size();
    if(eps.size() != n || rho.size() != n) throw InputError("nodal_functionals: size mismatch");
    const auto A = op.grid().areas();
    std::vector<double> kin(n), cas(n);
    for(std::size_t i = 0; i < n; ++i) {
        kin[i] = two_pi * inv.kinetic_moment(eps[i]);
        cas[i] = two_pi * inv.casimir_moment(eps[i]);
    }
    return FunctionalReport::from_parts(sum_areas(A, rho), sum_areas(A, kin), op.potential_energy(rho),
                                        sum_areas(A, cas), "nodal energy moments");
}

double e0_identity_value(const SteadyState& ss)
{
    const auto A = ss.grid().areas();
    const std::size_t n = ss.grid().size();
    // Q'(f0) f0 moment, kinetic moment and int U0 rho0, each on its own
    std::vector<double> j(n), k(n), u(n);
    for(std::size_t i = 0; i < n; ++i) {
        const double e = ss.energy_gap(i);
        j[i] = two_pi * ss.inv.energy_moment(e);
        k[i] = two_pi * ss.inv.kinetic_moment(e);
        u[i] = ss.U0.values[i] * ss.rho0.values[i];
    }
    return (sum_areas(A, j) + sum_areas(A, k) + sum_areas(A, u)) / ss.mass;
}

Check interpolation_check(const RadialProfile& rho, double mu1, double rel_slack)
{
    const double n1 = 1 + mu1;
    const double p = 1 + 1 / n1;
    const double theta = (n1 + 1) / 4;
    Check c;
    c.name = "interpolation_inequality";
    c.lhs = lp_norm(rho, 4.0 / 3.0);
    c.rhs = std::pow(lp_norm(rho, 1.0), 1 - theta) * std::pow(lp_norm(rho, p), theta);
    c.pass = c.lhs <= c.rhs * (1 + rel_slack);
    return c;
}

Check lower_bound_check(const FunctionalReport& r, double C_M, double mu1)
{
    const double n1 = 1 + mu1;
    Check c;
    c.name = "lower_bound";
    c.lhs = r.d;
    c.rhs = r.p - C_M * (1 + std::pow(std::max(r.p, 0.0), n1 / 2));
    c.pass = c.lhs >= c.rhs - 1e-12 * std::fabs(c.rhs);
    return c;
}

double calibrate_lower_bound(std::span<const FunctionalReport> reports, double mu1)
{
    const double n1 = 1 + mu1;
    double C = 0;
    for(const auto& r : reports) C = std::max(C, (r.p - r.d) / (1 + std::pow(std::max(r.p, 0.0), n1 / 2)));
    return C;
}

FunctionalReport evaluate_steady(const SteadyState& ss)
{
    if(!(ss.mass >= 0) || !ss.op) throw InputError("evaluate_steady: state is not initialised");
    if(ss.mass == 0) return FunctionalReport::from_parts(0, 0, 0, 0, "nodal energy moments");
    const std::size_t n = ss.grid().size();
    std::vector<double> eps(n);
    for(std::size_t i = 0; i < n; ++i) eps[i] = std::max(ss.energy_gap(i), 0.0);
    FunctionalReport r = nodal_functionals(ss.inv, eps, ss.rho0.values, *ss.op);

    Check e0;
    e0.name = "e0_identity";
    e0.lhs = e0_identity_value(ss);
    e0.rhs = ss.E0;
    e0.pass = std::fabs(e0.lhs - e0.rhs) <= 1e-6 * std::fabs(ss.E0);
    r.checks.push_back(e0);

    Check vir;
    vir.name = "virial";
    vir.lhs = std::fabs(2 * r.e_kin + r.e_pot) / std::fabs(r.e_pot);
    vir.rhs = 0.01;
    vir.pass = vir.lhs <= vir.rhs;
    r.checks.push_back(vir);

    Check neg;
    neg.name = "d_negative";
    neg.lhs = r.d;
    neg.rhs = 0;
    neg.pass = r.d < 0;
    r.checks.push_back(neg);

    r.checks.push_back(interpolation_check(ss.rho0, ss.model().declared().mu1));
    return r;
}

// ---------------------------------------------------------------------------

namespace {

constexpr long key_offset = 1L << 20;
constexpr long key_max = (1L << 21) - 1;

std::uint64_t pack_key(long ia, long ir, long ip)
{
    auto c = [](long v) { return static_cast<std::uint64_t>(std::clamp(v, 0L, key_max)); };
    return (c(ia) << 42) | (c(ir + key_offset) << 21) | c(ip + key_offset);
}

struct AxiCoords {
    double A, vr, vp;
};

AxiCoords axi_coords(const ParticleEnsemble& e, std::size_t i)
{
    const double x = e.x1[i], y = e.x2[i];
    const double r = std::sqrt(x * x + y * y);
    AxiCoords c{std::numbers::pi * r * r, 0, 0};
    if(r > 0) {
        c.vr = (x * e.v1[i] + y * e.v2[i]) / r;
        c.vp = (x * e.v2[i] - y * e.v1[i]) / r;
    } else {
        c.vr = std::sqrt(e.v1[i] * e.v1[i] + e.v2[i] * e.v2[i]);
    }
    return c;
}

}  // namespace

PhaseHistogram build_histogram(const ParticleEnsemble& ens, const HistogramOptions& opts)
{
    const std::size_t N = ens.size();
    if(N == 0) throw InputError("build_histogram: empty ensemble");
    if(!(opts.scott_factor > 0)) throw InputError("build_histogram: scott_factor must be positive");
    const double W = deterministic_sum(N, [&](std::size_t i) { return ens.w[i]; });
    const double W2 = deterministic_sum(N, [&](std::size_t i) { return ens.w[i] * ens.w[i]; });
    std::vector<AxiCoords> xc(N);
    parallel_chunks(N, 4096, [&](std::size_t, std::size_t b, std::size_t e) {
        for(std::size_t i = b; i < e; ++i) xc[i] = axi_coords(ens, i);
    });
    auto mean = [&](auto get) { return deterministic_sum(N, [&](std::size_t i) { return ens.w[i] * get(xc[i]); }) / W; };
    const double mA = mean([](const AxiCoords& c) { return c.A; });
    const double mr = mean([](const AxiCoords& c) { return c.vr; });
    const double mp = mean([](const AxiCoords& c) { return c.vp; });
    const double sA = std::sqrt(mean([&](const AxiCoords& c) { return (c.A - mA) * (c.A - mA); }));
    const double sr = std::sqrt(mean([&](const AxiCoords& c) { return (c.vr - mr) * (c.vr - mr); }));
    const double sp = std::sqrt(mean([&](const AxiCoords& c) { return (c.vp - mp) * (c.vp - mp); }));
    const double n_eff = W * W / W2;
    const double shrink = opts.scott_factor * std::pow(n_eff, -0.2);
    PhaseHistogram h;
    // a single particle (or a cold ensemble) still needs finite cells
    auto width = [&](double s, double fallback) { return s > 0 ? shrink * s : fallback; };
    h.hA = width(sA, std::max(mA, 1.0));
    h.hvr = width(sr, 1.0);
    h.hvp = width(sp, 1.0);

    std::vector<std::pair<std::uint64_t, std::uint32_t>> keys(N);
    parallel_chunks(N, 4096, [&](std::size_t, std::size_t b, std::size_t e) {
        for(std::size_t i = b; i < e; ++i) {
            const auto& c = xc[i];
            keys[i] = {pack_key(static_cast<long>(std::floor(c.A / h.hA)), static_cast<long>(std::floor(c.vr / h.hvr)),
                                static_cast<long>(std::floor(c.vp / h.hvp))),
                       static_cast<std::uint32_t>(i)};
        }
    });
    std::sort(keys.begin(), keys.end());
    for(std::size_t k = 0; k < N;) {
        const std::uint64_t key = keys[k].first;
        PhaseHistogram::Cell cell{static_cast<long>(key >> 42), static_cast<long>((key >> 21) & key_max) - key_offset,
                                  static_cast<long>(key & key_max) - key_offset, 0, 0};
        for(; k < N && keys[k].first == key; ++k) {
            const double w = ens.w[keys[k].second];
            cell.weight += w;
            cell.weight_sq += w * w;
        }
        h.cells.push_back(cell);
    }
    return h;
}

CasimirEstimate histogram_casimir(const CasimirModel& model, const PhaseHistogram& hist, bool bias_correction)
{
    const double vol = hist.volume();
    std::vector<double> val(hist.cells.size()), var(hist.cells.size());
    for(std::size_t k = 0; k < hist.cells.size(); ++k) {
        const auto& c = hist.cells[k];
        const double f = c.weight / vol;
        double v = vol * model.Q(f);
        if(bias_correction) v -= 0.5 * model.d2Q(f) * c.weight_sq / vol;
        val[k] = v;
        const double g = model.dQ(f);
        var[k] = g * g * c.weight_sq;
    }
    return {pairwise_sum(val.data(), val.size()), pairwise_sum(var.data(), var.size())};
}

Deposit deposit_density(const ParticleEnsemble& ens, const KernelOperator& op)
{
    const RadialGrid& g = op.grid();
    const std::size_t n = g.size(), N = ens.size();
    const auto A = g.areas();
    constexpr std::size_t chunk = 4096;
    const std::size_t nc = num_chunks(N, chunk);
    std::vector<std::vector<double>> part(nc);
    std::vector<double> self(nc, 0.0), outside(nc, 0.0);
    parallel_chunks(N, chunk, [&](std::size_t c, std::size_t b, std::size_t e) {
        auto& acc = part[c];
        acc.assign(n, 0.0);
        double s = 0, out = 0;
        for(std::size_t p = b; p < e; ++p) {
            const double r = std::sqrt(ens.x1[p] * ens.x1[p] + ens.x2[p] * ens.x2[p]);
            const std::size_t i = g.locate(r);
            const double w = ens.w[p];
            if(i == RadialGrid::npos) {
                out += w;
                continue;
            }
            const double t = (r - g.r(i)) / (g.r(i + 1) - g.r(i));
            const double w0 = w * (1 - t), w1 = w * t;
            acc[i] += w0;
            acc[i + 1] += w1;
            const double d0 = w0 / A[i], d1 = w1 / A[i + 1];
            s += d0 * d0 * op.entry(i, i) + 2 * d0 * d1 * op.entry(i, i + 1) + d1 * d1 * op.entry(i + 1, i + 1);
        }
        self[c] = -0.5 * s;
        outside[c] = out;
    });
    Deposit d;
    d.rho.assign(n, 0.0);
    for(std::size_t c = 0; c < nc; ++c)
        for(std::size_t i = 0; i < n; ++i) d.rho[i] += part[c][i];
    for(std::size_t i = 0; i < n; ++i) d.rho[i] /= A[i];
    d.self_energy = pairwise_sum(self.data(), self.size());
    d.outside_mass = pairwise_sum(outside.data(), outside.size());
    return d;
}

FunctionalReport evaluate_ensemble(const CasimirModel& model, const ParticleEnsemble& ens, const KernelOperator& op,
                                   const HistogramOptions& opts)
{
    if(ens.size() == 0) throw InputError("evaluate_ensemble: empty ensemble");
    return evaluate_ensemble(model, ens, op, build_histogram(ens, opts), opts);
}

FunctionalReport evaluate_ensemble(const CasimirModel& model, const ParticleEnsemble& ens, const KernelOperator& op,
                                   const PhaseHistogram& hist, const HistogramOptions& opts)
{
    if(ens.size() == 0) throw InputError("evaluate_ensemble: empty ensemble");
    ens.validate();
    const std::size_t N = ens.size();
    const double mass = deterministic_sum(N, [&](std::size_t i) { return ens.w[i]; });
    const double ekin = 0.5 * deterministic_sum(N, [&](std::size_t i) {
                            return ens.w[i] * (ens.v1[i] * ens.v1[i] + ens.v2[i] * ens.v2[i]);
                        });
    const Deposit dep = deposit_density(ens, op);
    const double epot = op.potential_energy(dep.rho) - dep.self_energy;
    const CasimirEstimate cas = histogram_casimir(model, hist, opts.bias_correction);
    return FunctionalReport::from_parts(mass, ekin, epot, cas.value, "particle sums, deposited density, phase-space histogram");
}

// ---------------------------------------------------------------------------

void ScalingParams::validate() const
{
    if(!(a > 0 && b > 0 && c > 0) || !std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c))
        throw InputError("ScalingParams: a, b, c must be positive and finite");
}

RescaleResult rescale_steady(const SteadyState& ss, const ScalingParams& sp)
{
    sp.validate();
    const double a = sp.a, b = sp.b, c = sp.c;
    const double c2 = c * c;
    const FunctionalReport base = evaluate_steady(ss);
    const auto A = ss.grid().areas();
    const std::size_t n = ss.grid().size();

    RescaleResult out;
    out.mass_predicted = a / (b * b * c2) * base.mass;
    std::vector<double> cas_a(n);
    for(std::size_t i = 0; i < n; ++i) cas_a[i] = two_pi * ss.inv.casimir_moment_scaled(std::max(ss.energy_gap(i), 0.0), a);
    const double C_af = sum_areas(A, cas_a);
    out.predicted = FunctionalReport::from_parts(out.mass_predicted, a / (b * b * c2 * c2) * base.e_kin,
                                                 a * a / (b * b * b * c2 * c2) * base.e_pot, C_af / (b * b * c2),
                                                 "scaling laws");

    // materialised state: nodes r_i / b carry f_bar(v) = a q(e_i - c^2 |v|^2 / 2)
    const KernelOperator op = ss.op->scaled(1 / b);
    const auto Ab = op.grid().areas();
    std::vector<double> rho(n), kin(n), cas(n);
    const CasimirModel& model = ss.model();
    for(std::size_t i = 0; i < n; ++i) {
        const double e = ss.energy_gap(i);
        const double top = e / c2;
        rho[i] = two_pi * integrate_w([&](double w) { return a * ss.inv.q(e - c2 * w); }, top);
        kin[i] = two_pi * integrate_w([&](double w) { return w * a * ss.inv.q(e - c2 * w); }, top);
        cas[i] = two_pi * integrate_w([&](double w) { return model.Q(a * ss.inv.q(e - c2 * w)); }, top);
    }
    out.direct = FunctionalReport::from_parts(sum_areas(Ab, rho), sum_areas(Ab, kin), op.potential_energy(rho),
                                              sum_areas(Ab, cas), "materialised rescaled state");
    out.rho_direct = std::move(rho);
    return out;
}

ScalingParams scaling_triple(double m, double mu3)
{
    if(!(m > 0)) throw InputError("scaling_triple: mass ratio must be positive");
    if(!(mu3 > 0 && mu3 < 1)) throw InputError("scaling_triple: mu3 must lie in (0, 1)");
    ScalingParams p;
    p.a = std::pow(m, mu3 / (1 - mu3));
    p.c = std::pow(p.a, -0.5 / mu3);
    p.b = std::pow(p.a, 1 / mu3) / m;
    return p;
}

ScalingInequalityReport scaling_inequality_check(const SteadyState& s1, const SteadyState& s2, double tolerance)
{
    if(!(s1.mass > 0 && s1.mass <= s2.mass * (1 + 1e-12)))
        throw InputError("scaling_inequality_check: need 0 < M1 <= M2");
    ScalingInequalityReport r;
    r.M1 = s1.mass;
    r.M2 = s2.mass;
    r.m = std::min(r.M1 / r.M2, 1.0);
    r.alpha = s2.model().alpha();
    r.D1 = evaluate_steady(s1).d;
    r.D2 = evaluate_steady(s2).d;
    r.rhs = std::pow(r.m, 1 + r.alpha) * r.D2;
    r.margin = r.D1 - r.rhs;
    r.holds = r.margin >= -tolerance * std::fabs(r.rhs);
    r.triple = scaling_triple(r.m, s2.model().declared().mu3);
    const RescaleResult rr = rescale_steady(s2, r.triple);
    r.rescaled_mass = rr.direct.mass;
    r.rescaled_d = rr.direct.d;
    r.mechanism_margin = r.rescaled_d - r.rhs;
    r.mechanism_holds = r.mechanism_margin >= -tolerance * std::fabs(r.rhs);
    r.support1 = s1.support_edge;
    r.support2 = s2.support_edge;
    return r;
}

ScalingInequalityReport scaling_inequality_check(const CasimirModel& model, double M1, double M2,
                                                 const SolverOptions& opts, double tolerance)
{
    if(!(M1 > 0 && M1 <= M2)) throw InputError("scaling_inequality_check: need 0 < M1 <= M2");
    const auto family = assemble_unit_family(opts.grid);
    const SteadyState s2 = solve(model, M2, opts, family);
    const SteadyState s1 = M1 == M2 ? s2 : solve(model, M1, opts, family);
    return scaling_inequality_check(s1, s2, tolerance);
}

// ---------------------------------------------------------------------------

double split_constant(double alpha)
{
    if(!(alpha > 0)) throw InputError("split_constant: alpha must be positive");
    auto ratio = [alpha](double x) {
        return (std::pow(1 - x, 1 + alpha) + std::pow(x, 1 + alpha) - 1) / ((1 - x) * x);
    };
    // symmetric about 1/2; the x -> 0 limit is -(1 + alpha)
    double best = -(1 + alpha);
    constexpr int samples = 200;
    double x_best = 0.5;
    for(int k = 1; k <= samples; ++k) {
        const double x = 0.5 * k / samples;
        if(ratio(x) > best) {
            best = ratio(x);
            x_best = x;
        }
    }
    const double lo = std::max(x_best - 0.5 / samples, 1e-12), hi = std::min(x_best + 0.5 / samples, 0.5);
    const auto m = boost::math::tools::brent_find_minima([&](double x) { return -ratio(x); }, lo, hi, 52);
    return std::max(best, -m.second);
}

namespace {

/// Grid with nodes at R and R (1 + delta) added, and the density split there.
struct SplitGrid {
    RadialGrid grid;
    std::vector<double> inner, outer;
};

SplitGrid split_at(const RadialProfile& rho, double R)
{
    constexpr double delta = 1e-8;
    const auto& g = rho.grid;
    std::vector<double> nodes, inner, outer;
    const double R2 = R * (1 + delta);
    bool inserted = false;
    for(std::size_t i = 0; i < g.size(); ++i) {
        const double r = g.r(i);
        if(!inserted && r >= R) {
            const double v = rho.at(R);
            if(r > R) {
                nodes.push_back(R);
                inner.push_back(v);
                outer.push_back(0);
            }
            if(r > R2 || r == R) {
                nodes.push_back(R2);
                inner.push_back(0);
                outer.push_back(rho.at(R2));
            }
            inserted = true;
            if(r == R) continue;
            if(r <= R2) {
                nodes.back() = r;
                outer.back() = rho.values[i];
                continue;
            }
        }
        nodes.push_back(r);
        inner.push_back(inserted ? 0.0 : rho.values[i]);
        outer.push_back(inserted ? rho.values[i] : 0.0);
    }
    return {RadialGrid::from_nodes(std::move(nodes)), std::move(inner), std::move(outer)};
}

}  // namespace

SplitReport split_diagnostic(const SteadyState& ss, double R, double C_M, double outer_constant)
{
    if(!(R > 0) || !std::isfinite(R)) throw InputError("split_diagnostic: R must be positive");
    SplitReport s;
    s.R = R;
    const double r_max = ss.grid().r_max();
    s.mass = mass_inside(ss.rho0, r_max);
    s.interior_mass = mass_inside(ss.rho0, std::min(R, r_max));
    s.exterior_mass = R < r_max ? s.mass - s.interior_mass : 0.0;
    s.norm_4_3 = lp_norm(ss.rho0, 4.0 / 3.0);
    const double lambda = s.exterior_mass;
    if(lambda > 0) {
        const SplitGrid sg = split_at(ss.rho0, R);
        const KernelOperator op = KernelOperator::assemble(sg.grid);
        s.mixed_term = -op.interaction(sg.outer, sg.inner);
    }
    s.C_alpha = split_constant(ss.model().alpha());
    const double D_M = evaluate_steady(ss).d;
    const double M = s.mass;
    s.C_M_required = lambda > 0 ? std::sqrt(R) * s.C_alpha * D_M * (M - lambda) / (M * M) : 0.0;
    s.C_M = std::isnan(C_M) ? s.C_M_required : C_M;
    C_M = s.C_M;
    s.lhs = 0;
    s.rhs = (s.C_alpha * D_M / (M * M) * (M - lambda) - C_M / std::sqrt(R)) * lambda;
    s.holds = s.lhs >= s.rhs - 1e-12 * std::fabs(s.C_alpha * D_M / M) * lambda;
    if(lambda > 0) {
        s.outer_constant = outer_constant > 0 ? outer_constant
                                              : outer_potential_energy(ss.rho0, ss.U0, R, 1.0).implied_constant;
    } else {
        s.outer_constant = std::max(outer_constant, 0.0);
    }
    s.mixed_bound = s.outer_constant / std::sqrt(R) * s.norm_4_3 * lambda;
    s.mixed_holds = std::fabs(s.mixed_term) <= s.mixed_bound * (1 + 1e-9);
    return s;
}

// ---------------------------------------------------------------------------

StabilityDistance stability_distance(const SteadyState& ss, const ParticleEnsemble& ens, const HistogramOptions& opts)
{
    if(ens.size() == 0) throw InputError("stability_distance: empty ensemble");
    return stability_distance(ss, ens, build_histogram(ens, opts), opts);
}

StabilityDistance stability_distance(const SteadyState& ss, const ParticleEnsemble& ens, const PhaseHistogram& hist,
                                     const HistogramOptions& opts)
{
    if(ens.size() == 0) throw InputError("stability_distance: empty ensemble");
    const CasimirModel& model = ss.model();
    const std::size_t N = ens.size();
    StabilityDistance out;
    const CasimirEstimate est = histogram_casimir(model, hist, opts.bias_correction);
    out.casimir_f = est.value;

    // f0 averaged over every cell that meets its support
    const double vol = hist.volume();
    double gap_max = 0;
    for(std::size_t i = 0; i < ss.grid().size(); ++i) gap_max = std::max(gap_max, ss.energy_gap(i));
    const double vmax = std::sqrt(2 * gap_max);
    const double A_edge = std::numbers::pi * ss.support_edge * ss.support_edge;
    const long na = static_cast<long>(std::floor(A_edge / hist.hA));
    const long r_lo = static_cast<long>(std::floor(-vmax / hist.hvr)), r_hi = static_cast<long>(std::floor(vmax / hist.hvr));
    const long p_lo = static_cast<long>(std::floor(-vmax / hist.hvp)), p_hi = static_cast<long>(std::floor(vmax / hist.hvp));
    using G4 = boost::math::quadrature::gauss<double, 4>;
    std::array<double, 4> gx{}, gw{};
    {
        const auto& ab = G4::abscissa();
        const auto& wt = G4::weights();
        std::size_t k = 0;
        for(std::size_t i = 0; i < ab.size(); ++i) {
            gx[k] = 0.5 * (1 - ab[i]);
            gw[k++] = 0.5 * wt[i];
            gx[k] = 0.5 * (1 + ab[i]);
            gw[k++] = 0.5 * wt[i];
        }
    }
    const long nr = r_hi - r_lo + 1, np = p_hi - p_lo + 1;
    const std::size_t ncell = static_cast<std::size_t>((na + 1) * nr * np);
    std::vector<double> cell_Q(ncell, 0.0), cell_f0(ncell, 0.0);
    parallel_chunks(static_cast<std::size_t>(na + 1), 1, [&](std::size_t, std::size_t b, std::size_t e) {
        for(std::size_t ia = b; ia < e; ++ia) {
            std::array<double, 4> gap{};
            for(int i = 0; i < 4; ++i) {
                const double Aq = (double(ia) + gx[i]) * hist.hA;
                gap[i] = ss.E0 - ss.U0.at(std::sqrt(Aq / std::numbers::pi));
            }
            for(long jr = 0; jr < nr; ++jr)
                for(long jp = 0; jp < np; ++jp) {
                    double avg = 0;
                    for(int i = 0; i < 4; ++i) {
                        if(!(gap[i] > 0)) continue;
                        for(int j = 0; j < 4; ++j) {
                            const double vr = (double(r_lo + jr) + gx[j]) * hist.hvr;
                            for(int k = 0; k < 4; ++k) {
                                const double vp = (double(p_lo + jp) + gx[k]) * hist.hvp;
                                avg += gw[i] * gw[j] * gw[k] * ss.inv.q(gap[i] - 0.5 * (vr * vr + vp * vp));
                            }
                        }
                    }
                    cell_Q[(ia * nr + jr) * np + jp] = vol * model.Q(avg);
                    cell_f0[(ia * nr + jr) * np + jp] = avg;
                }
        }
    });
    out.casimir_f0_cells = pairwise_sum(cell_Q.data(), cell_Q.size());

    // L2 distance over the cells meeting supp f0: sum f0^2 + sum over occupied (f^2 - 2 f f0)
    std::vector<double> sq(ncell);
    for(std::size_t c = 0; c < ncell; ++c) sq[c] = cell_f0[c] * cell_f0[c];
    double l2 = pairwise_sum(sq.data(), ncell);
    for(const auto& c : hist.cells) {
        if(c.ia < 0 || c.ia > na || c.ir < r_lo || c.ir > r_hi || c.ip < p_lo || c.ip > p_hi) continue;
        const double f0 = cell_f0[(static_cast<std::size_t>(c.ia) * nr + (c.ir - r_lo)) * np + (c.ip - p_lo)];
        if(!(f0 > 0)) continue;
        const double f = c.weight / vol;
        l2 += f * f - 2 * f * f0;
    }
    out.l2_support = std::sqrt(std::max(l2, 0.0) * vol);

    const FunctionalReport base = evaluate_steady(ss);
    // int int (E - E0) f0 = E_kin + int U0 rho0 - E0 M
    const double f0_term = base.e_kin + 2 * base.e_pot - ss.E0 * base.mass;
    std::vector<double> e(N);
    parallel_chunks(N, 4096, [&](std::size_t, std::size_t b, std::size_t en) {
        for(std::size_t i = b; i < en; ++i) {
            const double r = std::sqrt(ens.x1[i] * ens.x1[i] + ens.x2[i] * ens.x2[i]);
            const double U = r < ss.grid().r_max() ? ss.U0.at(r) : -ss.mass / r;
            e[i] = 0.5 * (ens.v1[i] * ens.v1[i] + ens.v2[i] * ens.v2[i]) + U - ss.E0;
        }
    });
    const double W = deterministic_sum(N, [&](std::size_t i) { return ens.w[i]; });
    const double f_term = deterministic_sum(N, [&](std::size_t i) { return ens.w[i] * e[i]; });
    const double e_mean = f_term / W;
    const double var_e = deterministic_sum(N, [&](std::size_t i) {
        const double z = e[i] - e_mean;
        return ens.w[i] * ens.w[i] * z * z;
    });
    out.energy_term = f_term - f0_term;
    out.d = out.casimir_f - out.casimir_f0_cells + out.energy_term;
    out.d_raw = out.casimir_f - base.casimir + out.energy_term;
    out.eps_mc = 3 * std::sqrt(est.variance + var_e);

    // E_pot(rho_f - rho0) without particle self-energy
    const Deposit dep = deposit_density(ens, *ss.op);
    const double ff = ss.op->interaction(dep.rho, dep.rho) + 2 * dep.self_energy;
    const double f0f = ss.op->interaction(ss.rho0.values, dep.rho);
    const double f0f0 = ss.op->interaction(ss.rho0.values, ss.rho0.values);
    out.epot_diff = -0.5 * (ff - 2 * f0f + f0f0);
    return out;
}

}  // namespace flatvp
