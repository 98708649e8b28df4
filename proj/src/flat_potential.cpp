#include "flatvp/flat_potential.hpp"
#include "flatvp/elliptic.hpp"
#include "flatvp/errors.hpp"
#include "flatvp/parallel.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace flatvp {

double flat_kernel_weight(double r, double s, double abs_separation)
{
    const double sum = r + s;
    if(!(sum > 0)) return 0.0;
    return 8 * std::numbers::pi * r * s / sum * elliptic_k_complement(abs_separation / sum);
}

namespace {

template<std::size_t M>
struct GaussRule {
    std::array<double, M> x{};   // on [0,1]
    std::array<double, M> w{};
    GaussRule()
    {
        using G = boost::math::quadrature::gauss<double, M>;
        const auto& ab = G::abscissa();
        const auto& wt = G::weights();
        std::size_t k = 0;
        for(std::size_t i = 0; i < ab.size(); ++i) {
            if(ab[i] == 0) {
                x[k] = 0.5;
                w[k++] = 0.5 * wt[i];
                continue;
            }
            x[k] = 0.5 * (1 - ab[i]);
            w[k++] = 0.5 * wt[i];
            x[k] = 0.5 * (1 + ab[i]);
            w[k++] = 0.5 * wt[i];
        }
    }
};

const GaussRule<8>& gauss8()
{
    static const GaussRule<8> g;
    return g;
}

const GaussRule<4>& gauss4()
{
    static const GaussRule<4> g;
    return g;
}

const GaussRule<20>& gauss20()
{
    static const GaussRule<20> g;
    return g;
}

/// Integrals of the kernel weight against the two hat pieces of panel [a,b]:
/// returns {int (b-s)/h w(r,s) ds, int (s-a)/h w(r,s) ds}. The panel may contain
/// r (split there) or lie close to it.
std::array<double, 2> panel_moments_singular(double r, double a, double b)
{
    const double h = b - a;
    const auto& g = gauss20();
    std::array<double, 2> out{0, 0};
    // s = s0 + dir t for t in (0, len); |r - s| = gap + t, so the separation is
    // formed without cancellation. t = len u^4 flattens the log singularity at t = 0.
    auto piece = [&](double s0, double dir, double len, double gap) {
        if(!(len > 0)) return;
        for(std::size_t k = 0; k < g.x.size(); ++k) {
            const double u = g.x[k], u3 = u * u * u;
            const double t = len * u3 * u;
            const double s = s0 + dir * t;
            const double w = g.w[k] * 4 * len * u3 * flat_kernel_weight(r, s, gap + t);
            const double up = (s - a) / h;
            out[0] += (1 - up) * w;
            out[1] += up * w;
        }
    };
    if(r > a && r < b) {
        piece(r, -1, r - a, 0);
        piece(r, +1, b - r, 0);
    } else if(r <= a) {
        piece(a, +1, h, a - r);
    } else {
        piece(b, -1, h, r - b);
    }
    return out;
}

/// Outer breakpoints (fractions of the r-panel) graded toward both ends, where
/// the inner integral has an x log x endpoint behaviour.
constexpr std::array<double, 11> kGraded = {0, 1e-5, 1e-3, 1e-2, 0.08, 0.5, 0.92, 0.99, 0.999, 1 - 1e-5, 1};

/// 2x2 block I_ab = int_{P_p} int_{P_q} phi_a(r) psi_b(s) w(r,s) ds dr for a
/// coincident or adjacent panel pair.
std::array<double, 4> singular_block(double ra, double rb, double sa, double sb)
{
    const auto& g = gauss8();
    const double hr = rb - ra;
    std::array<double, 4> I{0, 0, 0, 0};
    for(std::size_t k = 0; k + 1 < kGraded.size(); ++k) {
        const double lo = ra + hr * kGraded[k], hi = ra + hr * kGraded[k + 1];
        for(std::size_t i = 0; i < g.x.size(); ++i) {
            const double r = lo + (hi - lo) * g.x[i];
            const double wr = (hi - lo) * g.w[i];
            const double phi1 = (r - ra) / hr, phi0 = 1 - phi1;
            const auto m = panel_moments_singular(r, sa, sb);
            I[0] += wr * phi0 * m[0];
            I[1] += wr * phi0 * m[1];
            I[2] += wr * phi1 * m[0];
            I[3] += wr * phi1 * m[1];
        }
    }
    return I;
}

template<std::size_t M>
std::array<double, 4> regular_block(const GaussRule<M>& g, double ra, double rb, double sa, double sb)
{
    const double hr = rb - ra, hs = sb - sa;
    std::array<double, 4> I{0, 0, 0, 0};
    for(std::size_t i = 0; i < g.x.size(); ++i) {
        const double r = ra + hr * g.x[i];
        const double wr = hr * g.w[i];
        const double phi1 = g.x[i], phi0 = 1 - phi1;
        double m0 = 0, m1 = 0;
        for(std::size_t j = 0; j < g.x.size(); ++j) {
            const double s = sa + hs * g.x[j];
            const double w = hs * g.w[j] * flat_kernel_weight(r, s, std::fabs(r - s));
            m0 += (1 - g.x[j]) * w;
            m1 += g.x[j] * w;
        }
        I[0] += wr * phi0 * m0;
        I[1] += wr * phi0 * m1;
        I[2] += wr * phi1 * m0;
        I[3] += wr * phi1 * m1;
    }
    return I;
}

}  // namespace

KernelOperator::KernelOperator(RadialGrid g, std::vector<double> S)
    : grid_(std::move(g)), n_(grid_.size()), S_(std::move(S))
{
}

KernelOperator KernelOperator::assemble(const RadialGrid& grid)
{
    const std::size_t n = grid.size();
    const std::size_t panels = n - 1;
    // blocks[p] holds the 2x2 blocks of panel row p against panels q >= p
    std::vector<std::vector<std::array<double, 4>>> blocks(panels);
    parallel_chunks(panels, 4, [&](std::size_t, std::size_t b, std::size_t e) {
        for(std::size_t p = b; p < e; ++p) {
            auto& row = blocks[p];
            row.resize(panels - p);
            const double ra = grid.r(p), rb = grid.r(p + 1);
            for(std::size_t q = p; q < panels; ++q) {
                const double sa = grid.r(q), sb = grid.r(q + 1);
                if(q <= p + 1) {
                    row[q - p] = singular_block(ra, rb, sa, sb);
                    continue;
                }
                // well separated pairs see a smooth kernel
                const bool far = sa - rb >= 3 * std::max(rb - ra, sb - sa);
                row[q - p] = far ? regular_block(gauss4(), ra, rb, sa, sb) : regular_block(gauss8(), ra, rb, sa, sb);
            }
        }
    });
    std::vector<double> S(n * n, 0.0);
    for(std::size_t p = 0; p < panels; ++p) {
        for(std::size_t q = p; q < panels; ++q) {
            const auto& I = blocks[p][q - p];
            for(std::size_t a = 0; a < 2; ++a)
                for(std::size_t b = 0; b < 2; ++b) {
                    const double v = I[2 * a + b];
                    S[(p + a) * n + (q + b)] += v;
                    if(q != p) S[(q + b) * n + (p + a)] += v;
                }
        }
    }
    // the coincident block is symmetric analytically; remove quadrature asymmetry
    for(std::size_t i = 0; i < n; ++i)
        for(std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (S[i * n + j] + S[j * n + i]);
            S[i * n + j] = S[j * n + i] = v;
        }
    return KernelOperator(grid, std::move(S));
}

KernelOperator KernelOperator::scaled(double factor) const
{
    std::vector<double> S = S_;
    const double f3 = factor * factor * factor;
    for(double& v : S) v *= f3;
    return KernelOperator(grid_.scaled(factor), std::move(S));
}

std::vector<double> KernelOperator::potential(std::span<const double> rho) const
{
    if(rho.size() != n_) throw InputError("KernelOperator: density size does not match grid");
    std::vector<double> U(n_);
    const auto A = grid_.areas();
    parallel_chunks(n_, 64, [&](std::size_t, std::size_t b, std::size_t e) {
        for(std::size_t i = b; i < e; ++i) {
            const double* row = &S_[i * n_];
            double s = 0;
            for(std::size_t j = 0; j < n_; ++j) s += row[j] * rho[j];
            U[i] = -s / A[i];
        }
    });
    return U;
}

RadialProfile KernelOperator::potential(const RadialProfile& rho) const
{
    return RadialProfile(grid_, potential(std::span<const double>(rho.values)));
}

double KernelOperator::interaction(std::span<const double> rho1, std::span<const double> rho2) const
{
    if(rho1.size() != n_ || rho2.size() != n_) throw InputError("KernelOperator: density size does not match grid");
    std::vector<double> partial(n_);
    for(std::size_t i = 0; i < n_; ++i) {
        const double* row = &S_[i * n_];
        double s = 0;
        for(std::size_t j = 0; j < n_; ++j) s += row[j] * rho2[j];
        partial[i] = rho1[i] * s;
    }
    return pairwise_sum(partial.data(), partial.size());
}

double KernelOperator::potential_energy(std::span<const double> rho) const
{
    return -0.5 * interaction(rho, rho);
}

RadialProfile potential_from_density(const RadialProfile& rho)
{
    for(std::size_t i = 0; i < rho.size(); ++i)
        if(rho.values[i] < 0)
            throw InputError("potential_from_density: negative density at node " + std::to_string(i));
    return KernelOperator::assemble(rho.grid).potential(rho);
}

// ---------------------------------------------------------------------------

namespace {

/// 2 pi int_{lo}^{hi} r f(r) g(r) dr for linear f, g on one cell (3-point Gauss: exact).
template<class F>
double cell_integral(double lo, double hi, F fg)
{
    static const double x[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
    static const double w[3] = {5.0 / 18, 8.0 / 18, 5.0 / 18};
    double s = 0;
    for(int k = 0; k < 3; ++k) {
        const double r = lo + (hi - lo) * x[k];
        s += w[k] * r * fg(r);
    }
    return 2 * std::numbers::pi * (hi - lo) * s;
}

double outer_integral(const RadialProfile& rho, const RadialProfile& U, double R, bool weight_by_U)
{
    const auto& g = rho.grid;
    double total = 0;
    for(std::size_t i = 0; i + 1 < g.size(); ++i) {
        const double a = g.r(i), b = g.r(i + 1);
        if(b <= R) continue;
        const double lo = std::max(a, R);
        total += cell_integral(lo, b, [&](double r) {
            const double t = (r - a) / (b - a);
            const double d = (1 - t) * rho.values[i] + t * rho.values[i + 1];
            if(!weight_by_U) return d;
            return -d * ((1 - t) * U.values[i] + t * U.values[i + 1]);
        });
    }
    return total;
}

}  // namespace

double mass_inside(const RadialProfile& rho, double R)
{
    const auto& g = rho.grid;
    double total = 0;
    for(std::size_t i = 0; i + 1 < g.size(); ++i) {
        const double a = g.r(i), b = g.r(i + 1);
        if(a >= R) break;
        const double hi = std::min(b, R);
        total += cell_integral(a, hi, [&](double r) {
            const double t = (r - a) / (b - a);
            return (1 - t) * rho.values[i] + t * rho.values[i + 1];
        });
    }
    return total;
}

OuterEnergyReport outer_potential_energy(const RadialProfile& rho, const RadialProfile& U, double R,
                                         double constant)
{
    if(!(R > 0 && R < rho.grid.r_max()))
        throw InputError("outer_potential_energy: R must lie inside the grid span");
    if(U.size() != rho.size()) throw InputError("outer_potential_energy: profile sizes differ");
    OuterEnergyReport rep;
    rep.R = R;
    rep.constant = constant;
    rep.outer_energy = outer_integral(rho, U, R, true);
    rep.outer_mass = outer_integral(rho, U, R, false);
    rep.norm_4_3 = lp_norm(rho, 4.0 / 3.0);
    const double scale = rep.norm_4_3 * rep.outer_mass / std::sqrt(R);
    rep.rhs = constant * scale;
    rep.bound_holds = rep.outer_energy <= rep.rhs;
    rep.implied_constant = scale > 0 ? rep.outer_energy / scale : 0.0;
    return rep;
}

DecayFit fit_outer_decay(const RadialProfile& rho, const RadialProfile& U, std::span<const double> radii)
{
    DecayFit fit;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for(double R : radii) {
        const double e = outer_potential_energy(rho, U, R, 1.0).outer_energy;
        fit.radii.push_back(R);
        fit.outer_energy.push_back(e);
        if(!(e > 0)) continue;
        const double x = std::log(R), y = std::log(e);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double m = double(fit.radii.size());
    const double den = m * sxx - sx * sx;
    fit.exponent = den != 0 ? (m * sxy - sx * sy) / den : 0.0;
    return fit;
}

double lp_norm(const RadialProfile& rho, double p)
{
    if(!(p >= 1)) throw InputError("lp_norm: exponent must be >= 1");
    const auto& g = rho.grid;
    const std::size_t n = g.size();
    auto f = [&](std::size_t i) { return g.r(i) * std::pow(std::max(rho.values[i], 0.0), p); };
    double s = 0;
    std::size_t i = 0;
    for(; i + 2 < n; i += 2) {
        const double h0 = g.r(i + 1) - g.r(i), h1 = g.r(i + 2) - g.r(i + 1);
        s += (h0 + h1) / 6 *
             ((2 - h1 / h0) * f(i) + (h0 + h1) * (h0 + h1) / (h0 * h1) * f(i + 1) + (2 - h0 / h1) * f(i + 2));
    }
    if(i + 1 < n) s += 0.5 * (g.r(i + 1) - g.r(i)) * (f(i) + f(i + 1));
    return std::pow(2 * std::numbers::pi * s, 1 / p);
}

}  // namespace flatvp
