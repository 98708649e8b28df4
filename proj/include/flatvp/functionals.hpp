#pragma once
#include "flatvp/casimir.hpp"
#include "flatvp/ensemble.hpp"
#include "flatvp/flat_potential.hpp"
#include "flatvp/steady_state.hpp"

#include <span>
#include <string>
#include <vector>

namespace flatvp {

struct Check {
    std::string name;
    double lhs = 0;
    double rhs = 0;
    bool pass = false;
};

/// Energy-Casimir functionals of one state. p = e_kin + casimir and
/// d = p + e_pot are always formed from the stored parts.
struct FunctionalReport {
    double mass = 0;
    double e_kin = 0;
    double e_pot = 0;
    double casimir = 0;
    double p = 0;
    double d = 0;
    std::string method;   ///< how the entries were computed
    std::vector<Check> checks;

    static FunctionalReport from_parts(double mass, double e_kin, double e_pot, double casimir, std::string method);
    bool all_pass() const;
};

/// Functionals of the isotropic state f = q(e(r) - |v|^2/2) with nodal energy
/// gaps e and nodal density rho, integrated with the lumped nodal areas.
FunctionalReport nodal_functionals(const InverseQ& inv, std::span<const double> eps, std::span<const double> rho,
                                   const KernelOperator& op);

/// E_kin, E_pot, C of a steady state, plus the checks
/// e0_identity, virial, d_negative and interpolation_inequality.
FunctionalReport evaluate_steady(const SteadyState& ss);

/// (1/M) int int (Q'(f0) + E) f0 dv dx, which equals E0 on a steady state.
double e0_identity_value(const SteadyState& ss);

/// ||rho||_{4/3} <= ||rho||_1^{1-theta} ||rho||_p^theta with p = 1 + 1/n1,
/// n1 = 1 + mu1 and theta = (n1 + 1)/4.
Check interpolation_check(const RadialProfile& rho, double mu1, double rel_slack = 1e-6);

/// D >= P - C_M (1 + P^{n1/2}), n1 = 1 + mu1.
Check lower_bound_check(const FunctionalReport& r, double C_M, double mu1);
/// Smallest C_M for which lower_bound_check passes on every report.
double calibrate_lower_bound(std::span<const FunctionalReport> reports, double mu1);

// ---------------------------------------------------------------------------
// ensembles

struct HistogramOptions {
    double scott_factor = 3.5;    ///< h_j = scott_factor sigma_j N_eff^{-1/5}
    bool bias_correction = true;  ///< subtract the second-order Poisson bias of Q(f_hat)
};

/// Phase-space histogram in the axisymmetric coordinates (A = pi r^2, v_r, v_phi);
/// the 4D phase-space volume of a cell is dA dv_r dv_phi.
struct PhaseHistogram {
    double hA = 0, hvr = 0, hvp = 0;
    struct Cell {
        long ia, ir, ip;
        double weight;
        double weight_sq;
    };
    std::vector<Cell> cells;   ///< occupied cells, sorted by index
    double volume() const { return hA * hvr * hvp; }
};

PhaseHistogram build_histogram(const ParticleEnsemble& ens, const HistogramOptions& opts = {});

struct CasimirEstimate {
    double value = 0;
    double variance = 0;
};

CasimirEstimate histogram_casimir(const CasimirModel& model, const PhaseHistogram& hist, bool bias_correction);

/// Cloud-in-cell deposit onto the grid nodes: rho_i = sum of hat weights / A_i.
/// Particles beyond the last node are skipped. `self_energy` is the sum over
/// particles of -1/2 d_p^T S d_p for each particle's own two-node deposit.
struct Deposit {
    std::vector<double> rho;
    double self_energy = 0;
    double outside_mass = 0;
};
Deposit deposit_density(const ParticleEnsemble& ens, const KernelOperator& op);

/// E_kin = 1/2 sum w |v|^2; E_pot from the deposited density without particle
/// self-energy; C from the phase-space histogram.
FunctionalReport evaluate_ensemble(const CasimirModel& model, const ParticleEnsemble& ens, const KernelOperator& op,
                                   const HistogramOptions& opts = {});
/// Same with a histogram already built from `ens`.
FunctionalReport evaluate_ensemble(const CasimirModel& model, const ParticleEnsemble& ens, const KernelOperator& op,
                                   const PhaseHistogram& hist, const HistogramOptions& opts);

// ---------------------------------------------------------------------------
// scaling

/// f_bar(x, v) = a f(b x, c v)
struct ScalingParams {
    double a = 1, b = 1, c = 1;
    void validate() const;
};

struct RescaleResult {
    double mass_predicted = 0;
    FunctionalReport predicted;   ///< from the scaling laws and C(a f)
    FunctionalReport direct;      ///< from the materialised state on the grid r / b
    std::vector<double> rho_direct;
};

RescaleResult rescale_steady(const SteadyState& ss, const ScalingParams& p);

/// (a, b, c) mapping mass M2 to M1 = m M2 with m a^{1/mu3} = m c^{-2} = m^2 b.
ScalingParams scaling_triple(double m, double mu3);

struct ScalingInequalityReport {
    double M1 = 0, M2 = 0, m = 0, alpha = 0;
    double D1 = 0, D2 = 0;
    double rhs = 0;      ///< m^{1+alpha} D2
    double margin = 0;   ///< D1 - rhs
    bool holds = false;  ///< margin >= -tolerance |rhs|
    ScalingParams triple;
    double rescaled_mass = 0;
    double rescaled_d = 0;    ///< D of the rescaled M2 state
    double mechanism_margin = 0;
    bool mechanism_holds = false;
    double support1 = 0, support2 = 0;
};

/// Compares two solved states (M1 <= M2).
ScalingInequalityReport scaling_inequality_check(const SteadyState& s1, const SteadyState& s2,
                                                 double tolerance = 1e-8);
/// Solves both masses on one grid family and compares them.
ScalingInequalityReport scaling_inequality_check(const CasimirModel& model, double M1, double M2,
                                                 const SolverOptions& opts, double tolerance = 1e-8);

// ---------------------------------------------------------------------------
// splitting

/// Least C < 0 with (1-x)^{1+alpha} + x^{1+alpha} - 1 <= C (1-x) x on [0, 1].
double split_constant(double alpha);

struct SplitReport {
    double R = 0;
    double mass = 0;
    double interior_mass = 0;
    double exterior_mass = 0;
    double mixed_term = 0;     ///< int U_1 rho_2 dx
    double norm_4_3 = 0;
    double C_alpha = 0;
    double C_M = 0;
    double C_M_required = 0;   ///< smallest C_M for which the inequality holds on this state
    double lhs = 0;            ///< D(f) - D_M, zero for the minimiser itself
    double rhs = 0;            ///< (C_alpha D_M / M^2 (M - lambda) - C_M / sqrt R) lambda
    bool holds = false;
    double outer_constant = 0; ///< constant used for the mixed-term bound
    double mixed_bound = 0;    ///< outer_constant R^{-1/2} ||rho||_{4/3} lambda
    bool mixed_holds = false;
};

/// Splits the steady state at radius R. A NaN `C_M` is replaced by C_M_required;
/// `outer_constant` <= 0 calibrates it from outer_potential_energy at R (its implied constant).
SplitReport split_diagnostic(const SteadyState& ss, double R, double C_M, double outer_constant = 0);

// ---------------------------------------------------------------------------
// stability

struct StabilityDistance {
    double d = 0;            ///< coarse-grained distance (f0 averaged over the histogram cells)
    double d_raw = 0;        ///< same with the exact C(f0)
    double eps_mc = 0;       ///< 3 sigma Monte-Carlo tolerance of d
    double epot_diff = 0;    ///< E_pot(rho_f - rho_0)
    double casimir_f = 0;
    double casimir_f0_cells = 0;
    double energy_term = 0;  ///< int int (E - E0)(f - f0)
    double l2_support = 0;   ///< L2 distance of the histogram f from the cell-averaged f0 on the cells meeting supp f0
};

/// d(f, f0) = [C(f) - C(f0)] + int int (E - E0)(f - f0) with E = |v|^2/2 + U0.
StabilityDistance stability_distance(const SteadyState& ss, const ParticleEnsemble& ens,
                                     const HistogramOptions& opts = {});
StabilityDistance stability_distance(const SteadyState& ss, const ParticleEnsemble& ens, const PhaseHistogram& hist,
                                     const HistogramOptions& opts);

}  // namespace flatvp
