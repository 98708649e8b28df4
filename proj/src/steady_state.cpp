#include "flatvp/steady_state.hpp"
#include "flatvp/errors.hpp"
#include "flatvp/functionals.hpp"
#include "flatvp/rng.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace flatvp {

namespace {

constexpr double two_pi = 2 * std::numbers::pi;
constexpr double support_cutoff = 1e-14;

RadialGrid make_grid(const GridSpec& spec, double r_max)
{
    switch(spec.spacing) {
    case Spacing::Uniform: return RadialGrid::uniform(spec.n, r_max);
    case Spacing::Log: return RadialGrid::logarithmic(spec.n, spec.core_fraction * r_max, r_max);
    case Spacing::Hybrid: return RadialGrid::hybrid(spec.n, spec.core_fraction * r_max, r_max);
    case Spacing::Explicit: break;
    }
    throw InputError("GridSpec: explicit spacing cannot be generated");
}

double nodal_mass(std::span<const double> A, std::span<const double> rho)
{
    double m = 0;
    for(std::size_t i = 0; i < rho.size(); ++i) m += A[i] * rho[i];
    return m;
}

struct MassSolve {
    double E0;
    bool saturated;   // the bracket cannot hold mass M; E0 = E_hi
};

/// E0 with sum_i A_i 2 pi G(E0 - U_i) = M on [E_lo, E_hi].
MassSolve solve_cutoff(const InverseQ& inv, std::span<const double> A, std::span<const double> U, double M,
                       double E_lo, double E_hi, double guess)
{
    auto mass_at = [&](double E) {
        double m = 0;
        for(std::size_t i = 0; i < U.size(); ++i) m += A[i] * inv.q_antiderivative(E - U[i]);
        return two_pi * m;
    };
    const double m_hi = mass_at(E_hi);
    if(m_hi < M) return {E_hi, true};
    const double lo = std::max(E_lo, *std::min_element(U.begin(), U.end()));
    if(mass_at(lo) > M)
        throw ConvergenceError("no state at mass " + format_double(M) + " on the cutoff bracket [" + format_double(E_lo) +
                               ", " + format_double(E_hi) + "]");
    auto f = [&](double E) {
        double m = 0, dm = 0;
        for(std::size_t i = 0; i < U.size(); ++i) {
            m += A[i] * inv.q_antiderivative(E - U[i]);
            dm += A[i] * inv.q(E - U[i]);
        }
        return std::make_pair(two_pi * m - M, two_pi * dm);
    };
    std::uintmax_t iters = 200;
    const double x0 = std::clamp(guess, lo, E_hi);
    const double E = boost::math::tools::newton_raphson_iterate(f, x0, lo, E_hi, 50, iters);
    return {E, false};
}

double interpolated_edge(const RadialProfile& U, double E0)
{
    const auto& g = U.grid;
    for(std::size_t i = 0; i + 1 < g.size(); ++i) {
        const double e0 = E0 - U.values[i], e1 = E0 - U.values[i + 1];
        if(e0 > 0 && e1 <= 0) return g.r(i) + (g.r(i + 1) - g.r(i)) * e0 / (e0 - e1);
    }
    return g.r_max();
}

struct Relaxed {
    std::vector<double> rho;
    std::vector<double> U;
    double E0 = 0;
    double residual = 0;
    int iterations = 0;
    std::vector<double> history;
};

Relaxed relax(const InverseQ& inv, const KernelOperator& op, std::vector<double> rho, double M,
              const SolverOptions& opts, double E_lo, double E_hi, double E_guess)
{
    const auto A = op.grid().areas();
    const std::size_t n = rho.size();
    // start from exactly mass M
    const double m0 = nodal_mass(A, rho);
    if(!(m0 > 0)) throw InputError("solve: initial density has no mass");
    for(double& x : rho) x *= M / m0;

    Relaxed out;
    double E0 = E_guess;
    double prev_residual = std::numeric_limits<double>::infinity();
    int growth = 0;
    std::vector<double> target(n);
    for(int it = 0; it < opts.max_iters; ++it) {
        std::vector<double> U = op.potential(rho);
        const MassSolve ms = solve_cutoff(inv, A, U, M, E_lo, E_hi, E0);
        E0 = ms.E0;
        double rmax = 0;
        for(std::size_t i = 0; i < n; ++i) {
            target[i] = two_pi * inv.q_antiderivative(E0 - U[i]);
            rmax = std::max(rmax, target[i]);
        }
        if(ms.saturated) {
            // potential still too shallow to hold M below E_hi: renormalise
            const double mt = nodal_mass(A, target);
            if(!(mt > 0)) throw ConvergenceError("solve: density vanished at the upper cutoff bracket");
            for(double& x : target) x *= M / mt;
            rmax *= M / mt;
        }
        double diff = 0;
        for(std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::fabs(rho[i] - target[i]));
        const double residual = diff / rmax;
        out.history.push_back(residual);
        if(!ms.saturated && residual <= opts.residual_tol) {
            // finish on the image itself so the support is exactly compact
            out.rho = target;
            out.U = op.potential(out.rho);
            out.E0 = solve_cutoff(inv, A, out.U, M, E_lo, E_hi, E0).E0;
            double d = 0, peak = 0;
            for(std::size_t i = 0; i < n; ++i) {
                const double t = two_pi * inv.q_antiderivative(out.E0 - out.U[i]);
                d = std::max(d, std::fabs(out.rho[i] - t));
                peak = std::max(peak, t);
            }
            out.residual = d / peak;
            out.history.push_back(out.residual);
            out.iterations = it + 1;
            return out;
        }
        growth = residual > prev_residual ? growth + 1 : 0;
        if(growth >= opts.divergence_window)
            throw ConvergenceError("solve: residual grew for " + std::to_string(growth) +
                                       " consecutive sweeps (last " + format_double(residual) +
                                       "); reduce the damping factor",
                                   std::move(out.history));
        prev_residual = residual;
        for(std::size_t i = 0; i < n; ++i) rho[i] += opts.damping * (target[i] - rho[i]);
    }
    const double last = out.history.empty() ? 0.0 : out.history.back();
    throw ConvergenceError("solve: no convergence after " + std::to_string(opts.max_iters) + " sweeps (residual " +
                               format_double(last) + ")",
                           std::move(out.history));
}

std::vector<double> kuzmin_guess(const RadialGrid& g, double M, double a)
{
    std::vector<double> rho(g.size());
    for(std::size_t i = 0; i < g.size(); ++i) {
        const double r = g.r(i);
        rho[i] = M * a / (two_pi * std::pow(r * r + a * a, 1.5));
    }
    return rho;
}

std::vector<double> resample(const RadialProfile& p, const RadialGrid& g)
{
    std::vector<double> v(g.size());
    for(std::size_t i = 0; i < g.size(); ++i) v[i] = p.at(g.r(i));
    return v;
}

}  // namespace

void SolverOptions::validate() const
{
    if(!(damping > 0 && damping <= 1)) throw InputError("solver: damping must lie in (0, 1]");
    if(max_iters < 1) throw InputError("solver: max_iters must be positive");
    if(!(residual_tol > 0) || !(mass_tol > 0)) throw InputError("solver: tolerances must be positive");
    if(!std::isnan(E_hi) && !(E_hi < 0)) throw InputError("solver: E_hi must be negative");
    if(!std::isnan(E_lo) && !std::isnan(E_hi) && !(E_lo < E_hi)) throw InputError("solver: need E_lo < E_hi");
    if(grid.n < RadialGrid::min_nodes) throw InputError("solver: grid needs at least 16 nodes");
    if(!(grid.r_max >= 0)) throw InputError("solver: r_max must be >= 0");
    if(!(grid.core_fraction > 0 && grid.core_fraction < 1)) throw InputError("solver: core_fraction must lie in (0, 1)");
    if(!(grid.support_factor > 1)) throw InputError("solver: support_factor must exceed 1");
    if(divergence_window < 1) throw InputError("solver: divergence_window must be positive");
}

RadialProfile density_from_potential(const InverseQ& inv, double E0, const RadialProfile& U)
{
    std::vector<double> rho(U.size());
    for(std::size_t i = 0; i < U.size(); ++i) {
        const double e = E0 - U.values[i];
        rho[i] = e > 0 ? two_pi * inv.q_antiderivative(e) : 0.0;
    }
    return RadialProfile(U.grid, std::move(rho));
}

double support_radius_of(const RadialProfile& rho)
{
    const double peak = *std::max_element(rho.values.begin(), rho.values.end());
    if(!(peak > 0)) return 0;
    for(std::size_t i = 0; i < rho.size(); ++i)
        if(rho.values[i] < support_cutoff * peak) return i == 0 ? 0.0 : rho.grid.r(i - 1);
    throw GridTooSmallError("support reaches the last grid node r = " + format_double(rho.grid.r_max()) +
                            "; increase r_max");
}

std::shared_ptr<const KernelOperator> assemble_unit_family(const GridSpec& spec)
{
    return std::make_shared<const KernelOperator>(KernelOperator::assemble(make_grid(spec, 1.0)));
}

SteadyState solve(const CasimirModel& model, double M, const SolverOptions& opts)
{
    opts.validate();
    return solve(model, M, opts, assemble_unit_family(opts.grid));
}

SteadyState solve(const CasimirModel& model, double M, const SolverOptions& opts,
                  std::shared_ptr<const KernelOperator> unit_family)
{
    if(!(M > 0) || !std::isfinite(M)) throw InputError("solve: mass must be positive and finite");
    opts.validate();
    if(!unit_family || unit_family->size() != opts.grid.n) throw InputError("solve: grid family does not match options");
    const InverseQ inv(model);
    const bool auto_grid = opts.grid.r_max == 0;
    double r_max = auto_grid ? opts.grid.support_factor : opts.grid.r_max;

    std::vector<double> all_history;
    std::vector<double> rho;
    double E_guess = std::numeric_limits<double>::quiet_NaN();
    std::shared_ptr<const KernelOperator> op;
    Relaxed rel;
    double edge = 0;
    for(int pass = 0;; ++pass) {
        if(pass > 60) throw ConvergenceError("solve: automatic grid radius did not settle");
        op = std::make_shared<const KernelOperator>(unit_family->scaled(r_max));
        const RadialGrid& g = op->grid();
        if(rho.empty()) rho = kuzmin_guess(g, M, r_max / 10);
        const double r_scale = r_max / opts.grid.support_factor;
        const double E_lo = std::isnan(opts.E_lo) ? -std::numeric_limits<double>::infinity() : opts.E_lo;
        const double E_hi = std::isnan(opts.E_hi) ? -1e-6 : opts.E_hi;
        if(std::isnan(E_guess)) E_guess = -M / r_scale;
        try {
            rel = relax(inv, *op, rho, M, opts, E_lo, E_hi, E_guess);
        } catch(ConvergenceError& e) {
            e.history.insert(e.history.begin(), all_history.begin(), all_history.end());
            throw;
        }
        all_history.insert(all_history.end(), rel.history.begin(), rel.history.end());
        const RadialProfile Uprof(g, rel.U);
        const RadialProfile rprof(g, rel.rho);
        bool hits_edge = false;
        try {
            support_radius_of(rprof);
        } catch(const GridTooSmallError&) {
            if(!auto_grid) throw;
            hits_edge = true;
        }
        edge = interpolated_edge(Uprof, rel.E0);
        if(!auto_grid) break;
        const double want = hits_edge ? 4 * r_max : opts.grid.support_factor * edge;
        if(std::fabs(want / r_max - 1) <= 1e-9 && !hits_edge) break;
        // carry the state over to the rescaled grid
        const RadialGrid next = g.scaled(want / r_max);
        rho = resample(rprof, next);
        E_guess = rel.E0;
        r_max = want;
    }

    const RadialGrid& g = op->grid();
    SteadyState ss(inv, RadialProfile(g, rel.rho), RadialProfile(g, rel.U));
    ss.E0 = rel.E0;
    ss.mass = nodal_mass(g.areas(), rel.rho);
    if(std::fabs(ss.mass - M) > opts.mass_tol * M)
        throw ConvergenceError("solve: mass defect " + format_double(ss.mass - M) + " exceeds tolerance");
    if(!(ss.E0 < 0)) throw ConvergenceError("solve: converged cutoff energy is not negative");
    ss.support_radius = support_radius_of(ss.rho0);
    ss.support_edge = edge;
    ss.residual = rel.residual;
    ss.iterations = static_cast<int>(all_history.size());
    ss.op = op;
    ss.residual_history = std::move(all_history);
    return ss;
}

SteadyState restore_state(const CasimirModel& model, const RadialProfile& rho, double E0)
{
    auto op = std::make_shared<const KernelOperator>(KernelOperator::assemble(rho.grid));
    for(double x : rho.values)
        if(x < 0) throw InputError("restore_state: negative density");
    SteadyState ss(InverseQ(model), rho, op->potential(rho));
    ss.E0 = E0;
    ss.mass = rho.integral();
    ss.op = op;
    double diff = 0, peak = 0;
    for(std::size_t i = 0; i < rho.size(); ++i) {
        const double t = two_pi * ss.inv.q_antiderivative(E0 - ss.U0.values[i]);
        diff = std::max(diff, std::fabs(rho.values[i] - t));
        peak = std::max(peak, t);
    }
    ss.residual = peak > 0 ? diff / peak : diff;
    ss.support_radius = support_radius_of(ss.rho0);
    ss.support_edge = interpolated_edge(ss.U0, E0);
    return ss;
}

// ---------------------------------------------------------------------------

namespace {

/// Three-point derivative on a nonuniform grid at interior node i.
double central_derivative(const RadialGrid& g, std::span<const double> f, std::size_t i)
{
    const double h1 = g.r(i) - g.r(i - 1), h2 = g.r(i + 1) - g.r(i);
    return (-h2 / (h1 * (h1 + h2))) * f[i - 1] + ((h2 - h1) / (h1 * h2)) * f[i] + (h1 / (h2 * (h1 + h2))) * f[i + 1];
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    const std::size_t n = x.size();
    if(n < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0, my = 0;
    for(std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxy = 0, sxx = 0;
    for(std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace

RegularityReport regularity_report(const SteadyState& ss)
{
    RegularityReport rep;
    const auto& g = ss.grid();
    const auto& rho = ss.rho0.values;
    const auto& U = ss.U0.values;
    const std::size_t n = g.size();
    for(std::size_t i = 0; i < n; ++i) {
        rep.max_abs_U = std::max(rep.max_abs_U, std::fabs(U[i]));
        rep.max_rho = std::max(rep.max_rho, rho[i]);
    }
    rep.bounded = std::isfinite(rep.max_abs_U) && std::isfinite(rep.max_rho);

    std::vector<double> dU(n, 0.0), drho(n, 0.0);
    for(std::size_t i = 1; i + 1 < n; ++i) {
        dU[i] = central_derivative(g, U, i);
        drho[i] = central_derivative(g, rho, i);
    }
    double max_dU = 0;
    for(double x : dU) max_dU = std::max(max_dU, std::fabs(x));
    for(std::size_t i = 1; i + 2 < n; ++i) {
        const double jump = std::fabs(dU[i + 1] - dU[i]);
        rep.gradient_lipschitz = std::max(rep.gradient_lipschitz, jump / (g.r(i + 1) - g.r(i)));
        rep.gradient_max_jump = std::max(rep.gradient_max_jump, max_dU > 0 ? jump / max_dU : 0.0);
    }

    // identity on interior nodes: the stencil stays off the outermost support
    // node, where rho ~ (edge - r)^{mu+1} spoils the three-point formula
    double max_drho = 0, max_defect = 0, edge_defect = 0;
    for(std::size_t i = 1; i + 1 < n; ++i) {
        if(!(ss.energy_gap(i + 1) > 0)) break;
        const double rhs = -two_pi * ss.inv.q(ss.energy_gap(i)) * dU[i];
        const double defect = std::fabs(drho[i] - rhs);
        max_drho = std::max(max_drho, std::fabs(drho[i]));
        if(i + 2 < n && ss.energy_gap(i + 2) > 0)
            max_defect = std::max(max_defect, defect);
        else
            edge_defect = std::max(edge_defect, defect);
    }
    rep.identity_defect = max_drho > 0 ? max_defect / max_drho : 0.0;
    rep.identity_defect_edge = max_drho > 0 ? edge_defect / max_drho : 0.0;

    // edge behaviour: nodes in the outer tenth of the energy range
    double gap_max = 0;
    std::size_t last = 0;
    for(std::size_t i = 0; i < n; ++i) {
        if(ss.energy_gap(i) > 0) {
            gap_max = std::max(gap_max, ss.energy_gap(i));
            last = i;
        }
    }
    std::vector<double> lx, ly, lr;
    for(std::size_t i = 0; i <= last; ++i) {
        const double e = ss.energy_gap(i);
        if(e > 0 && e < 0.1 * gap_max && rho[i] > 0) {
            lx.push_back(std::log(e));
            ly.push_back(std::log(rho[i]));
            lr.push_back(std::log(ss.support_edge - g.r(i)));
        }
    }
    rep.edge_exponent = fit_slope(lx, ly);
    rep.edge_exponent_radial = fit_slope(lr, ly);
    rep.edge_density = last + 1 < n ? rho[last + 1] : rho[last];
    return rep;
}

// ---------------------------------------------------------------------------

namespace {

/// e >= 0 with 2 pi G(e) = rho.
double invert_density(const InverseQ& inv, double rho)
{
    if(!(rho > 0)) return 0.0;
    const double target = rho / two_pi;
    double hi = 1;
    while(inv.q_antiderivative(hi) < target) hi *= 2;
    double lo = hi / 2;
    while(lo > 0 && inv.q_antiderivative(lo) > target) lo /= 2;
    auto f = [&](double e) { return inv.q_antiderivative(e) - target; };
    boost::math::tools::eps_tolerance<double> tol(50);
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
    return 0.5 * (r.first + r.second);
}

}  // namespace

MinimalityProbe minimality_probe(const SteadyState& ss, int count, std::uint64_t seed, double amplitude,
                                 double tolerance)
{
    if(count < 1) throw InputError("minimality_probe: count must be positive");
    if(!(amplitude > 0 && amplitude < 1)) throw InputError("minimality_probe: amplitude must lie in (0, 1)");
    const auto& g = ss.grid();
    const std::size_t n = g.size();
    std::vector<double> eps0(n);
    for(std::size_t i = 0; i < n; ++i) eps0[i] = std::max(ss.energy_gap(i), 0.0);
    MinimalityProbe out;
    out.d0 = nodal_functionals(ss.inv, eps0, ss.rho0.values, *ss.op).d;
    const double R = ss.support_edge;
    out.min_excess = std::numeric_limits<double>::infinity();
    for(int k = 0; k < count; ++k) {
        CounterRng rng(seed, static_cast<std::uint64_t>(k));
        const double centre = R * (0.1 + 0.8 * rng.uniform());
        const double width = R * (0.05 + 0.2 * rng.uniform());
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        std::vector<double> rho(n), eps(n);
        for(std::size_t i = 0; i < n; ++i) {
            const double z = (g.r(i) - centre) / width;
            rho[i] = ss.rho0.values[i] * (1 + sign * amplitude * std::exp(-z * z));
        }
        const double m = nodal_mass(g.areas(), rho);
        for(double& x : rho) x *= ss.mass / m;
        for(std::size_t i = 0; i < n; ++i) eps[i] = invert_density(ss.inv, rho[i]);
        const FunctionalReport rep = nodal_functionals(ss.inv, eps, rho, *ss.op);
        out.perturbed.push_back(rep.d);
        out.masses.push_back(rep.mass);
        out.min_excess = std::min(out.min_excess, rep.d - out.d0);
    }
    out.pass = out.min_excess >= -tolerance * std::fabs(out.d0);
    return out;
}

}  // namespace flatvp
