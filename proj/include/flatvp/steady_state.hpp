#pragma once
#include "flatvp/casimir.hpp"
#include "flatvp/flat_potential.hpp"
#include "flatvp/radial.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace flatvp {

/// Radial grid used by the solver. With r_max = 0 the outer radius follows the
/// solution: r_max = support_factor * support radius, refined until consistent.
struct GridSpec {
    std::size_t n = 512;
    Spacing spacing = Spacing::Hybrid;
    double r_max = 0;
    double core_fraction = 0.01;   ///< r_core / r_max for hybrid grids, r_min / r_max for log grids
    double support_factor = 20;
};

struct SolverOptions {
    double damping = 0.5;
    int max_iters = 5000;
    double residual_tol = 1e-10;
    double mass_tol = 1e-10;
    /// Cutoff-energy bracket; NaN selects [min U, -1e-6] (the lower end is always clipped to min U).
    double E_lo = std::numeric_limits<double>::quiet_NaN();
    double E_hi = std::numeric_limits<double>::quiet_NaN();
    int divergence_window = 10;
    GridSpec grid;

    void validate() const;
};

/// Converged steady state f0(x, v) = q(E0 - |v|^2/2 - U0(|x|)).
struct SteadyState {
    SteadyState(InverseQ inv_, RadialProfile rho, RadialProfile U)
        : inv(std::move(inv_)), rho0(std::move(rho)), U0(std::move(U)) {}

    InverseQ inv;
    double E0 = 0;
    double mass = 0;
    double support_radius = 0;   ///< radius of the last node with rho0 above the cutoff
    double support_edge = 0;     ///< interpolated zero of E0 - U0
    double residual = 0;
    int iterations = 0;
    RadialProfile rho0;
    RadialProfile U0;
    std::shared_ptr<const KernelOperator> op;   ///< potential operator of rho0.grid
    std::vector<double> residual_history;

    const CasimirModel& model() const { return inv.model(); }
    const RadialGrid& grid() const { return rho0.grid; }
    /// E0 - U0 at node i.
    double energy_gap(std::size_t i) const { return E0 - U0.values[i]; }
};

/// rho(r) = 2 pi G(E0 - U(r)); exactly zero where U >= E0.
RadialProfile density_from_potential(const InverseQ& inv, double E0, const RadialProfile& U);

/// Solves for the state of mass M. Each sweep recomputes U from rho, picks E0 so
/// that 2 pi G(E0 - U) carries mass M, and relaxes rho toward that density.
///
/// Throws InputError for M <= 0 or invalid options, ConvergenceError on
/// divergence or an exhausted E0 bracket, GridTooSmallError when the support
/// reaches the outer node of a fixed grid.
SteadyState solve(const CasimirModel& model, double M, const SolverOptions& opts = {});

/// Same, reusing a potential operator assembled on the unit-radius member of
/// the grid family (r_max = 1); the family is scaled to each trial radius.
SteadyState solve(const CasimirModel& model, double M, const SolverOptions& opts,
                  std::shared_ptr<const KernelOperator> unit_family);

/// Operator of the unit-radius grid described by `spec`.
std::shared_ptr<const KernelOperator> assemble_unit_family(const GridSpec& spec);

/// Rebuilds a state from stored profiles (e.g. a solve artifact). The
/// potential is recomputed from rho on the stored grid.
SteadyState restore_state(const CasimirModel& model, const RadialProfile& rho, double E0);

/// Support from the nodal density: first node (from the centre) where
/// rho < 1e-14 max rho; returns its predecessor's radius.
double support_radius_of(const RadialProfile& rho);

struct RegularityReport {
    double max_abs_U = 0;
    double max_rho = 0;
    double gradient_lipschitz = 0;    ///< max |U'_{i+1} - U'_i| / (r_{i+1} - r_i) over interior nodes
    double gradient_max_jump = 0;     ///< max |U'_{i+1} - U'_i| / max |U'|
    double identity_defect = 0;       ///< max |rho' + 2 pi q(E0 - U) U'| / max |rho'| over interior support nodes
    double identity_defect_edge = 0;  ///< same at the node next to the outermost support node (O(h^{1/2}))
    double edge_exponent = 0;         ///< slope of log rho vs log(E0 - U) near the edge
    double edge_exponent_radial = 0;  ///< slope of log rho vs log(edge - r)
    double edge_density = 0;          ///< rho at the first node past the support
    bool bounded = false;
};

RegularityReport regularity_report(const SteadyState& ss);

struct MinimalityProbe {
    double d0 = 0;                  ///< D(f0)
    std::vector<double> perturbed;  ///< D of each perturbed state
    std::vector<double> masses;
    double min_excess = 0;          ///< min over probes of D - D(f0)
    bool pass = false;
};

/// Mass-preserving smooth bumps on rho0; each perturbed density is realised by
/// the isotropic state q(e(r) - |v|^2/2) with 2 pi G(e(r)) = rho(r), and its
/// D is compared with D(f0).
MinimalityProbe minimality_probe(const SteadyState& ss, int count, std::uint64_t seed, double amplitude = 0.05,
                                 double tolerance = 1e-9);

}  // namespace flatvp
