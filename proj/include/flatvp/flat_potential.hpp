#pragma once
#include "flatvp/radial.hpp"

#include <span>
#include <vector>

namespace flatvp {

/// In-plane kernel of the axisymmetric flat potential (G = 1):
///   U(r) = -int_0^inf k(r,s) rho(s) ds,  k(r,s) = 4 s/(r+s) K(2 sqrt(rs)/(r+s)).
/// Returns the symmetric weight 2 pi r k(r,s) = 8 pi r s/(r+s) K, with the
/// separation |r - s| passed explicitly so that K is evaluated from the exact
/// complementary modulus |r - s|/(r + s).
double flat_kernel_weight(double r, double s, double abs_separation);

/// Discrete potential operator on a radial grid with piecewise-linear densities.
///
/// S_ij = int int hat_i(r) hat_j(s) 2 pi r k(r,s) dr ds is assembled once
/// (Galerkin form, symmetric by construction); nodal potentials are the
/// lumped projection U_i = -(S rho)_i / A_i. Hence sum_i A_i rho1_i U[rho2]_i
/// is exactly symmetric in (rho1, rho2). The logarithmic singularity of K on
/// the diagonal is integrated with tanh-sinh quadrature split at r = s.
class KernelOperator {
public:
    static KernelOperator assemble(const RadialGrid& grid);

    const RadialGrid& grid() const { return grid_; }
    std::size_t size() const { return grid_.size(); }

    /// The operator of grid().scaled(factor); exact because k is scale invariant.
    KernelOperator scaled(double factor) const;

    /// Nodal potential of a nodal density.
    std::vector<double> potential(std::span<const double> rho) const;
    RadialProfile potential(const RadialProfile& rho) const;

    /// rho1^T S rho2 = -int rho1 U[rho2] dx.
    double interaction(std::span<const double> rho1, std::span<const double> rho2) const;
    /// E_pot(rho) = 1/2 int rho U[rho] dx = -1/2 rho^T S rho.
    double potential_energy(std::span<const double> rho) const;

    double entry(std::size_t i, std::size_t j) const { return S_[i * n_ + j]; }

private:
    KernelOperator(RadialGrid g, std::vector<double> S);
    RadialGrid grid_;
    std::size_t n_ = 0;
    std::vector<double> S_;
};

/// Potential of an axisymmetric surface density (assembles a KernelOperator).
/// Throws InputError on a negative density node.
RadialProfile potential_from_density(const RadialProfile& rho);

struct OuterEnergyReport {
    double R = 0;
    double outer_energy = 0;   ///< -int_{|x|>R} rho U_rho dx
    double outer_mass = 0;     ///< int_{|x|>R} rho dx
    double norm_4_3 = 0;       ///< ||rho||_{4/3}
    double rhs = 0;            ///< C R^{-1/2} ||rho||_{4/3} outer_mass for the supplied C
    double constant = 0;
    bool bound_holds = false;
    /// Smallest C for which the bound holds at this R (outer_energy / (R^{-1/2} ||rho||_{4/3} outer_mass)).
    double implied_constant = 0;
};

/// Exterior interaction energy and the right-hand side of the outer bound.
/// `U` must be the potential of `rho` on the same grid. Throws InputError when R
/// is not inside (0, r_max).
OuterEnergyReport outer_potential_energy(const RadialProfile& rho, const RadialProfile& U, double R,
                                         double constant);

struct DecayFit {
    std::vector<double> radii;
    std::vector<double> outer_energy;
    double exponent = 0;   ///< least-squares slope of log(outer_energy) vs log(R)
};

DecayFit fit_outer_decay(const RadialProfile& rho, const RadialProfile& U, std::span<const double> radii);

/// (2 pi int s rho(s)^p ds)^{1/p}, composite three-point (Simpson) rule on the nodes.
double lp_norm(const RadialProfile& rho, double p);

/// 2 pi int_{r<R} r rho dr for the piecewise-linear interpolant (exact).
double mass_inside(const RadialProfile& rho, double R);

}  // namespace flatvp
