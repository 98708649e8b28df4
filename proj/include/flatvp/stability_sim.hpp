#pragma once
#include "flatvp/ensemble.hpp"
#include "flatvp/functionals.hpp"
#include "flatvp/steady_state.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace flatvp {

enum class ForceMethod { Grid, DirectSum };

std::string to_string(ForceMethod m);
ForceMethod force_method_from_string(const std::string& s);

/// dt, t_end and eps_soft equal to 0 are filled in from the steady state by
/// resolve(): dt = t_dyn / 200, t_end = 10 t_dyn, eps_soft = 0.01 support radius.
struct SimConfig {
    std::size_t N = 100000;
    double dt = 0;
    double t_end = 0;
    ForceMethod method = ForceMethod::Grid;
    double eps_soft = 0;
    std::uint64_t seed = 1;
    int cadence = 20;                   ///< steps between diagnostic rows
    std::size_t direct_cap = 100000;    ///< largest N accepted by the direct sum
    double escape_factor = 100;         ///< escape radius in support radii
    std::size_t force_nodes = 256;      ///< nodes of the uniform force grid (grid method)
    double force_extent = 2;            ///< force grid radius in support radii
    HistogramOptions histogram;

    void validate() const;
    SimConfig resolve(const SteadyState& ss) const;
};

/// 2 pi sqrt(R^3 / M) with R the support radius.
double dynamical_time(const SteadyState& ss);

/// N equal-weight samples of f0: r by inverse CDF of the radial mass profile,
/// w = |v|^2/2 by rejection from q(E0 - U0(r) - w), both angles uniform.
/// Particle i only uses the random stream keyed by i.
ParticleEnsemble sample(const SteadyState& ss, std::size_t N, std::uint64_t seed);

/// Kolmogorov-Smirnov distance between the sampled radii and the radial mass
/// profile of the state.
double radial_ks_distance(const SteadyState& ss, const ParticleEnsemble& ens);

/// Field evaluator. The grid method deposits on `grid_op`'s grid, recomputes U
/// and differentiates a clamped cubic spline of it; outside the grid the field
/// is that of a point mass. The direct method sums softened pair forces.
class ForceField {
public:
    static ForceField grid(std::shared_ptr<const KernelOperator> grid_op);
    static ForceField direct(double eps_soft, std::size_t cap = 100000);

    ForceMethod method() const { return method_; }
    double eps_soft() const { return eps_soft_; }
    const std::shared_ptr<const KernelOperator>& op() const { return op_; }

    void accelerations(const ParticleEnsemble& ens, std::vector<double>& a1, std::vector<double>& a2) const;

private:
    ForceMethod method_ = ForceMethod::Grid;
    std::shared_ptr<const KernelOperator> op_;
    double eps_soft_ = 0;
    std::size_t cap_ = 0;
};

/// -U'(r) from a nodal potential: clamped cubic spline with U'(0) = 0 and
/// U'(r_max) = mass / r_max^2.
class RadialForceSpline {
public:
    RadialForceSpline(const RadialGrid& grid, std::vector<double> U, double end_slope);
    /// dU/dr at r inside the grid.
    double slope(double r) const;

private:
    RadialGrid grid_;
    std::vector<double> U_, m_;   // m_ = second derivatives at the nodes
};

/// Kick-drift-kick leapfrog that keeps the accelerations of the current positions.
class Leapfrog {
public:
    Leapfrog(ForceField field, ParticleEnsemble& ens);
    /// Throws NonFiniteError with the particle index on a non-finite coordinate.
    void step(double dt);
    const std::vector<double>& a1() const { return a1_; }
    const std::vector<double>& a2() const { return a2_; }

private:
    ForceField field_;
    ParticleEnsemble& ens_;
    std::vector<double> a1_, a2_;
};

/// One leapfrog step with freshly computed forces.
void step(ParticleEnsemble& ens, double dt, const ForceField& field);

struct Perturbation {
    enum class Kind { None, Velocity, Radial };
    Kind kind = Kind::None;
    double delta = 0;

    /// velocity: v <- (1 + delta) v. radial: w_i <- w_i (1 + delta (2 r_i / R - 1)),
    /// renormalised to the original mass, R the support radius.
    void apply(ParticleEnsemble& ens, double support_radius) const;
};

std::string to_string(Perturbation::Kind k);
Perturbation::Kind perturbation_kind_from_string(const std::string& s);

struct TimeSeriesRow {
    double t = 0;
    double e_kin = 0, e_pot = 0, casimir = 0, D = 0;
    double d_dist = 0;     ///< coarse-grained d(f(t), f0)
    double epot_diff = 0;  ///< E_pot(f(t) - f0)
    double L3 = 0;
    double max_r = 0;
    double eps_mc = 0;
    double d_raw = 0;
    double f_max = 0;      ///< largest histogram cell density
    double l2_supp = 0;    ///< L2 distance from f0 on its support (histogram cells)
    std::size_t escaped = 0;
};

struct RunSummary {
    std::vector<TimeSeriesRow> rows;
    SimConfig config;                 ///< resolved
    double t_dyn = 0;
    double D_drift = 0;               ///< max |D(t) - D(0)| / |D(0)|
    double L3_drift = 0;              ///< max |L3(t) - L3(0)| / sum w |L3| at t = 0
    double energy_drift = 0;          ///< max |E(t) - E(0)| / |E(0)|, E = e_kin + e_pot
    double noise_floor = 0;           ///< max(|d(0)|, eps_mc(0))
    bool d_within_floor = false;      ///< |d(t)| <= 3 noise_floor at every row
    bool d_nonnegative = false;       ///< d(t) >= -eps_mc(t) at every row
    std::size_t escaped = 0;
    ParticleEnsemble final_state;
};

/// Uniform grid of cfg.force_nodes nodes on [0, cfg.force_extent R] used by the grid method.
std::shared_ptr<const KernelOperator> force_operator(const SteadyState& ss, const SimConfig& cfg);

/// Samples f0, applies the perturbation and integrates to t_end, emitting a row
/// every `cadence` steps (and at t = 0 and at the end). `on_row` sees each row
/// as it is produced.
RunSummary run(const SteadyState& ss, const SimConfig& cfg, const Perturbation& pert,
               const std::function<void(const TimeSeriesRow&)>& on_row = {});

/// Diagnostics of one ensemble against the steady state.
TimeSeriesRow diagnostics(const SteadyState& ss, const ParticleEnsemble& ens, const HistogramOptions& opts);

void write_timeseries_header(std::ostream& os);
void write_timeseries_row(std::ostream& os, const TimeSeriesRow& row);
/// `x1,x2,v1,v2,w`, preceded by the '#' comment lines.
void write_snapshot_csv(std::ostream& os, const ParticleEnsemble& ens, const std::vector<std::string>& comments);

}  // namespace flatvp
