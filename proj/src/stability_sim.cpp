#include "flatvp/stability_sim.hpp"
#include "flatvp/errors.hpp"
#include "flatvp/parallel.hpp"
#include "flatvp/rng.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <ostream>

namespace flatvp {

namespace {

constexpr double two_pi = 2 * std::numbers::pi;

}  // namespace

std::string to_string(ForceMethod m)
{
    return m == ForceMethod::Grid ? "grid" : "direct";
}

ForceMethod force_method_from_string(const std::string& s)
{
    if(s == "grid") return ForceMethod::Grid;
    if(s == "direct") return ForceMethod::DirectSum;
    throw InputError("unknown force method '" + s + "' (expected grid or direct)");
}

void SimConfig::validate() const
{
    if(N < 1) throw InputError("sim: N must be positive");
    if(!(dt >= 0) || !std::isfinite(dt)) throw InputError("sim: dt must be positive (0 selects t_dyn/200)");
    if(!(t_end >= 0) || !std::isfinite(t_end)) throw InputError("sim: t_end must be >= 0");
    if(!(eps_soft >= 0) || !std::isfinite(eps_soft)) throw InputError("sim: eps_soft must be positive");
    if(cadence < 1) throw InputError("sim: cadence must be positive");
    if(!(escape_factor > 1)) throw InputError("sim: escape_factor must exceed 1");
    if(force_nodes < RadialGrid::min_nodes) throw InputError("sim: force_nodes must be at least 16");
    if(!(force_extent >= 1) || !std::isfinite(force_extent)) throw InputError("sim: force_extent must be >= 1");
    if(method == ForceMethod::DirectSum && N > direct_cap)
        throw InputError("sim: direct sum is capped at N = " + std::to_string(direct_cap) + "; use the grid method");
}

SimConfig SimConfig::resolve(const SteadyState& ss) const
{
    validate();
    SimConfig c = *this;
    const double td = dynamical_time(ss);
    if(c.dt == 0) c.dt = td / 200;
    if(c.t_end == 0) c.t_end = 10 * td;
    if(c.eps_soft == 0) c.eps_soft = 0.01 * ss.support_radius;
    if(!(c.dt > 0)) throw InputError("sim: dt must be positive");
    if(c.method == ForceMethod::DirectSum && !(c.eps_soft > 0)) throw InputError("sim: eps_soft must be positive");
    return c;
}

double dynamical_time(const SteadyState& ss)
{
    const double R = ss.support_radius;
    if(!(R > 0) || !(ss.mass > 0)) throw InputError("dynamical_time: state has no support");
    return two_pi * std::sqrt(R * R * R / ss.mass);
}

// ---------------------------------------------------------------------------

namespace {

/// Mass of the linear interpolant of rho on [r_i, r_i + t h].
double cell_mass(const RadialProfile& rho, std::size_t i, double t)
{
    const auto& g = rho.grid;
    const double r0 = g.r(i), h = g.r(i + 1) - r0;
    const double a = rho.values[i], d = rho.values[i + 1] - a;
    return two_pi * h * (r0 * a * t + (r0 * d + h * a) * t * t / 2 + h * d * t * t * t / 3);
}

struct RadialCdf {
    std::vector<double> cum;   // cum[i] = mass inside r_i
    double total = 0;
};

RadialCdf radial_cdf(const RadialProfile& rho)
{
    RadialCdf c;
    const std::size_t n = rho.size();
    c.cum.assign(n, 0.0);
    for(std::size_t i = 0; i + 1 < n; ++i) c.cum[i + 1] = c.cum[i] + cell_mass(rho, i, 1.0);
    c.total = c.cum.back();
    return c;
}

double cdf_at(const RadialProfile& rho, const RadialCdf& c, double r)
{
    const std::size_t i = rho.grid.locate(r);
    if(i == RadialGrid::npos) return r < rho.grid.r(0) ? 0.0 : 1.0;
    const double t = (r - rho.grid.r(i)) / (rho.grid.r(i + 1) - rho.grid.r(i));
    return (c.cum[i] + cell_mass(rho, i, t)) / c.total;
}

double invert_cdf(const RadialProfile& rho, const RadialCdf& c, double u)
{
    const double target = u * c.total;
    auto it = std::upper_bound(c.cum.begin(), c.cum.end(), target);
    std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - c.cum.begin() - 1, 0));
    i = std::min(i, c.cum.size() - 2);
    const double local = target - c.cum[i];
    auto f = [&](double t) { return cell_mass(rho, i, t) - local; };
    double t = 0;
    if(f(1.0) <= 0) {
        t = 1;
    } else if(f(0.0) < 0) {
        boost::math::tools::eps_tolerance<double> tol(50);
        std::uintmax_t iters = 100;
        const auto br = boost::math::tools::toms748_solve(f, 0.0, 1.0, tol, iters);
        t = 0.5 * (br.first + br.second);
    }
    const auto& g = rho.grid;
    return g.r(i) + t * (g.r(i + 1) - g.r(i));
}

}  // namespace

ParticleEnsemble sample(const SteadyState& ss, std::size_t N, std::uint64_t seed)
{
    if(N == 0) throw InputError("sample: N must be positive");
    if(N < 1000) std::clog << "warning: sampling only " << N << " particles; ensemble diagnostics will be noisy\n";
    const RadialCdf cdf = radial_cdf(ss.rho0);
    if(!(cdf.total > 0)) throw InputError("sample: state has no mass");
    ParticleEnsemble ens;
    ens.resize(N);
    const double w = ss.mass / double(N);
    parallel_chunks(N, 1024, [&](std::size_t, std::size_t b, std::size_t e) {
        for(std::size_t i = b; i < e; ++i) {
            CounterRng rng(seed, i);
            double r = 0, gap = 0;
            for(int tries = 0;; ++tries) {
                if(tries > 1000) throw ConvergenceError("sample: could not place particle inside the support");
                r = invert_cdf(ss.rho0, cdf, rng.uniform());
                gap = ss.E0 - ss.U0.at(r);
                if(gap > 0) break;
            }
            const double qmax = ss.inv.q(gap);
            double wv = 0;
            for(int tries = 0;; ++tries) {
                if(tries > 100000) throw ConvergenceError("sample: velocity rejection failed");
                wv = gap * rng.uniform();
                if(rng.uniform() * qmax <= ss.inv.q(gap - wv)) break;
            }
            const double phi = two_pi * rng.uniform();
            const double psi = two_pi * rng.uniform();
            const double speed = std::sqrt(2 * wv);
            ens.x1[i] = r * std::cos(phi);
            ens.x2[i] = r * std::sin(phi);
            ens.v1[i] = speed * std::cos(psi);
            ens.v2[i] = speed * std::sin(psi);
            ens.w[i] = w;
        }
    });
    return ens;
}

double radial_ks_distance(const SteadyState& ss, const ParticleEnsemble& ens)
{
    const std::size_t N = ens.size();
    if(N == 0) throw InputError("radial_ks_distance: empty ensemble");
    const RadialCdf cdf = radial_cdf(ss.rho0);
    std::vector<double> r(N);
    for(std::size_t i = 0; i < N; ++i) r[i] = std::sqrt(ens.x1[i] * ens.x1[i] + ens.x2[i] * ens.x2[i]);
    std::sort(r.begin(), r.end());
    double d = 0;
    for(std::size_t i = 0; i < N; ++i) {
        const double F = cdf_at(ss.rho0, cdf, r[i]);
        d = std::max({d, std::fabs(double(i + 1) / double(N) - F), std::fabs(double(i) / double(N) - F)});
    }
    return d;
}

// ---------------------------------------------------------------------------

RadialForceSpline::RadialForceSpline(const RadialGrid& grid, std::vector<double> U, double end_slope)
    : grid_(grid), U_(std::move(U))
{
    const std::size_t n = grid_.size();
    if(U_.size() != n) throw InputError("RadialForceSpline: size mismatch");
    // clamped spline: tridiagonal system for the nodal second derivatives
    std::vector<double> sub(n), diag(n), sup(n), rhs(n);
    auto h = [&](std::size_t i) { return grid_.r(i + 1) - grid_.r(i); };
    diag[0] = h(0) / 3;
    sup[0] = h(0) / 6;
    rhs[0] = (U_[1] - U_[0]) / h(0);
    for(std::size_t i = 1; i + 1 < n; ++i) {
        sub[i] = h(i - 1) / 6;
        diag[i] = (h(i - 1) + h(i)) / 3;
        sup[i] = h(i) / 6;
        rhs[i] = (U_[i + 1] - U_[i]) / h(i) - (U_[i] - U_[i - 1]) / h(i - 1);
    }
    sub[n - 1] = h(n - 2) / 6;
    diag[n - 1] = h(n - 2) / 3;
    rhs[n - 1] = end_slope - (U_[n - 1] - U_[n - 2]) / h(n - 2);
    for(std::size_t i = 1; i < n; ++i) {
        const double f = sub[i] / diag[i - 1];
        diag[i] -= f * sup[i - 1];
        rhs[i] -= f * rhs[i - 1];
    }
    m_.assign(n, 0.0);
    m_[n - 1] = rhs[n - 1] / diag[n - 1];
    for(std::size_t i = n - 1; i-- > 0;) m_[i] = (rhs[i] - sup[i] * m_[i + 1]) / diag[i];
}

double RadialForceSpline::slope(double r) const
{
    std::size_t i = grid_.locate(r);
    if(i == RadialGrid::npos) i = r < grid_.r(0) ? 0 : grid_.size() - 2;
    const double h = grid_.r(i + 1) - grid_.r(i);
    const double A = (grid_.r(i + 1) - r) / h, B = 1 - A;
    return (U_[i + 1] - U_[i]) / h - (3 * A * A - 1) / 6 * h * m_[i] + (3 * B * B - 1) / 6 * h * m_[i + 1];
}

ForceField ForceField::grid(std::shared_ptr<const KernelOperator> grid_op)
{
    if(!grid_op) throw InputError("ForceField: grid method needs an operator");
    ForceField f;
    f.method_ = ForceMethod::Grid;
    f.op_ = std::move(grid_op);
    return f;
}

ForceField ForceField::direct(double eps_soft, std::size_t cap)
{
    if(!(eps_soft > 0)) throw InputError("ForceField: eps_soft must be positive for the direct sum");
    ForceField f;
    f.method_ = ForceMethod::DirectSum;
    f.eps_soft_ = eps_soft;
    f.cap_ = cap;
    return f;
}

void ForceField::accelerations(const ParticleEnsemble& ens, std::vector<double>& a1, std::vector<double>& a2) const
{
    const std::size_t N = ens.size();
    a1.assign(N, 0.0);
    a2.assign(N, 0.0);
    if(N == 0) return;
    if(method_ == ForceMethod::DirectSum) {
        if(N > cap_) throw InputError("direct sum is capped at N = " + std::to_string(cap_));
        const double e2 = eps_soft_ * eps_soft_;
        parallel_chunks(N, 256, [&](std::size_t, std::size_t b, std::size_t e) {
            for(std::size_t i = b; i < e; ++i) {
                double ax = 0, ay = 0;
                for(std::size_t j = 0; j < N; ++j) {
                    if(j == i) continue;
                    const double dx = ens.x1[i] - ens.x1[j], dy = ens.x2[i] - ens.x2[j];
                    const double d2 = dx * dx + dy * dy + e2;
                    const double s = ens.w[j] / (d2 * std::sqrt(d2));
                    ax -= dx * s;
                    ay -= dy * s;
                }
                a1[i] = ax;
                a2[i] = ay;
            }
        });
        return;
    }
    const Deposit dep = deposit_density(ens, *op_);
    const RadialGrid& g = op_->grid();
    const double total = ens.total_mass();
    const double r_max = g.r_max();
    const RadialForceSpline spline(g, op_->potential(dep.rho), (total - dep.outside_mass) / (r_max * r_max));
    parallel_chunks(N, 4096, [&](std::size_t, std::size_t b, std::size_t e) {
        for(std::size_t i = b; i < e; ++i) {
            const double r = std::sqrt(ens.x1[i] * ens.x1[i] + ens.x2[i] * ens.x2[i]);
            if(!(r > 0)) continue;
            const double s = r < r_max ? spline.slope(r) / r : total / (r * r * r);
            a1[i] = -s * ens.x1[i];
            a2[i] = -s * ens.x2[i];
        }
    });
}

Leapfrog::Leapfrog(ForceField field, ParticleEnsemble& ens) : field_(std::move(field)), ens_(ens)
{
    field_.accelerations(ens_, a1_, a2_);
}

void Leapfrog::step(double dt)
{
    const std::size_t N = ens_.size();
    const double half = 0.5 * dt;
    for(std::size_t i = 0; i < N; ++i) {
        ens_.v1[i] += half * a1_[i];
        ens_.v2[i] += half * a2_[i];
        ens_.x1[i] += dt * ens_.v1[i];
        ens_.x2[i] += dt * ens_.v2[i];
    }
    // before the force pass spreads a bad coordinate to every particle
    for(std::size_t i = 0; i < N; ++i)
        if(!std::isfinite(ens_.x1[i]) || !std::isfinite(ens_.x2[i]))
            throw NonFiniteError("non-finite coordinate after step at t = " + format_double(ens_.time + dt), i);
    field_.accelerations(ens_, a1_, a2_);
    for(std::size_t i = 0; i < N; ++i) {
        ens_.v1[i] += half * a1_[i];
        ens_.v2[i] += half * a2_[i];
        if(!std::isfinite(ens_.x1[i]) || !std::isfinite(ens_.x2[i]) || !std::isfinite(ens_.v1[i]) ||
           !std::isfinite(ens_.v2[i]))
            throw NonFiniteError("non-finite coordinate after step at t = " + format_double(ens_.time + dt), i);
    }
    ens_.time += dt;
}

void step(ParticleEnsemble& ens, double dt, const ForceField& field)
{
    Leapfrog lf(field, ens);
    lf.step(dt);
}

// ---------------------------------------------------------------------------

std::string to_string(Perturbation::Kind k)
{
    switch(k) {
    case Perturbation::Kind::None: return "none";
    case Perturbation::Kind::Velocity: return "velocity";
    case Perturbation::Kind::Radial: return "radial";
    }
    return "none";
}

Perturbation::Kind perturbation_kind_from_string(const std::string& s)
{
    if(s == "none") return Perturbation::Kind::None;
    if(s == "velocity") return Perturbation::Kind::Velocity;
    if(s == "radial") return Perturbation::Kind::Radial;
    throw InputError("unknown perturbation '" + s + "' (expected none, velocity or radial)");
}

void Perturbation::apply(ParticleEnsemble& ens, double support_radius) const
{
    if(!std::isfinite(delta)) throw InputError("perturbation: delta must be finite");
    switch(kind) {
    case Kind::None: return;
    case Kind::Velocity:
        for(std::size_t i = 0; i < ens.size(); ++i) {
            ens.v1[i] *= 1 + delta;
            ens.v2[i] *= 1 + delta;
        }
        return;
    case Kind::Radial: {
        if(!(support_radius > 0)) throw InputError("perturbation: support radius must be positive");
        const double M = ens.total_mass();
        for(std::size_t i = 0; i < ens.size(); ++i) {
            const double r = std::sqrt(ens.x1[i] * ens.x1[i] + ens.x2[i] * ens.x2[i]);
            ens.w[i] *= 1 + delta * (2 * r / support_radius - 1);
            if(!(ens.w[i] > 0)) throw InputError("perturbation: radial rebalancing made a weight non-positive");
        }
        const double s = M / ens.total_mass();
        for(double& w : ens.w) w *= s;
        return;
    }
    }
}

// ---------------------------------------------------------------------------

std::shared_ptr<const KernelOperator> force_operator(const SteadyState& ss, const SimConfig& cfg)
{
    cfg.validate();
    const RadialGrid g = RadialGrid::uniform(cfg.force_nodes, cfg.force_extent * ss.support_radius);
    return std::make_shared<const KernelOperator>(KernelOperator::assemble(g));
}

TimeSeriesRow diagnostics(const SteadyState& ss, const ParticleEnsemble& ens, const HistogramOptions& opts)
{
    TimeSeriesRow row;
    row.t = ens.time;
    const PhaseHistogram h = build_histogram(ens, opts);
    const FunctionalReport fr = evaluate_ensemble(ss.model(), ens, *ss.op, h, opts);
    row.e_kin = fr.e_kin;
    row.e_pot = fr.e_pot;
    row.casimir = fr.casimir;
    row.D = fr.d;
    const StabilityDistance sd = stability_distance(ss, ens, h, opts);
    row.d_dist = sd.d;
    row.epot_diff = sd.epot_diff;
    row.eps_mc = sd.eps_mc;
    row.d_raw = sd.d_raw;
    row.l2_supp = sd.l2_support;
    row.L3 = ens.angular_momentum();
    row.max_r = ens.max_radius();
    for(const auto& c : h.cells) row.f_max = std::max(row.f_max, c.weight / h.volume());
    return row;
}

RunSummary run(const SteadyState& ss, const SimConfig& cfg_in, const Perturbation& pert,
               const std::function<void(const TimeSeriesRow&)>& on_row)
{
    RunSummary out;
    out.config = cfg_in.resolve(ss);
    const SimConfig& cfg = out.config;
    out.t_dyn = dynamical_time(ss);

    ParticleEnsemble ens = sample(ss, cfg.N, cfg.seed);
    pert.apply(ens, ss.support_radius);
    const ForceField field = cfg.method == ForceMethod::Grid ? ForceField::grid(force_operator(ss, cfg))
                                                             : ForceField::direct(cfg.eps_soft, cfg.direct_cap);
    Leapfrog lf(field, ens);

    const double escape_r = cfg.escape_factor * ss.support_radius;
    std::size_t escaped_logged = 0;
    const double L3abs0 = ens.angular_momentum_abs();
    auto emit = [&]() {
        TimeSeriesRow row = diagnostics(ss, ens, cfg.histogram);
        std::size_t esc = 0;
        for(std::size_t i = 0; i < ens.size(); ++i)
            if(std::sqrt(ens.x1[i] * ens.x1[i] + ens.x2[i] * ens.x2[i]) > escape_r) ++esc;
        row.escaped = esc;
        if(esc > escaped_logged) {
            std::clog << "t = " << format_double(row.t) << ": " << esc << " particles beyond " << format_double(escape_r)
                      << "\n";
            escaped_logged = esc;
        }
        if(on_row) on_row(row);
        out.rows.push_back(row);
    };

    emit();
    const double ratio = cfg.t_end / cfg.dt;
    const long nsteps = std::fabs(ratio - std::round(ratio)) < 1e-9 * std::max(ratio, 1.0)
                            ? std::lround(ratio)
                            : static_cast<long>(std::ceil(ratio));
    for(long s = 1; s <= nsteps; ++s) {
        lf.step(cfg.dt);
        if(s % cfg.cadence == 0 || s == nsteps) emit();
    }

    const TimeSeriesRow& r0 = out.rows.front();
    const double E0 = r0.e_kin + r0.e_pot;
    out.noise_floor = std::max(std::fabs(r0.d_dist), r0.eps_mc);
    out.d_within_floor = true;
    out.d_nonnegative = true;
    for(const auto& r : out.rows) {
        out.D_drift = std::max(out.D_drift, std::fabs(r.D - r0.D) / std::fabs(r0.D));
        out.L3_drift = std::max(out.L3_drift, L3abs0 > 0 ? std::fabs(r.L3 - r0.L3) / L3abs0 : 0.0);
        out.energy_drift = std::max(out.energy_drift, std::fabs(r.e_kin + r.e_pot - E0) / std::fabs(E0));
        out.d_within_floor = out.d_within_floor && std::fabs(r.d_dist) <= 3 * out.noise_floor;
        out.d_nonnegative = out.d_nonnegative && r.d_dist >= -r.eps_mc;
        out.escaped = std::max(out.escaped, r.escaped);
    }
    out.final_state = std::move(ens);
    return out;
}

// ---------------------------------------------------------------------------

void write_timeseries_header(std::ostream& os)
{
    os << "t,e_kin,e_pot,casimir,D,d_dist,epot_diff,L3,max_r,eps_mc,d_raw,f_max,l2_supp,escaped\n";
}

void write_timeseries_row(std::ostream& os, const TimeSeriesRow& r)
{
    for(double v : {r.t, r.e_kin, r.e_pot, r.casimir, r.D, r.d_dist, r.epot_diff, r.L3, r.max_r, r.eps_mc, r.d_raw, r.f_max,
                     r.l2_supp})
        os << format_double(v) << ',';
    os << r.escaped << '\n';
}

void write_snapshot_csv(std::ostream& os, const ParticleEnsemble& ens, const std::vector<std::string>& comments)
{
    for(const auto& c : comments) os << "# " << c << '\n';
    os << "x1,x2,v1,v2,w\n";
    for(std::size_t i = 0; i < ens.size(); ++i)
        os << format_double(ens.x1[i]) << ',' << format_double(ens.x2[i]) << ',' << format_double(ens.v1[i]) << ','
           << format_double(ens.v2[i]) << ',' << format_double(ens.w[i]) << '\n';
}

}  // namespace flatvp
