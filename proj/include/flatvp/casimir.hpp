#pragma once
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace flatvp {

enum class CasimirKind { Polytrope, DoublePower, Custom };

std::string to_string(CasimirKind kind);

/// Constants declared for the structural assumptions on Q:
///   (Q1) Q(f) >= C1 f^{1+1/mu1}            for f >= F0
///   (Q2) Q(f) <= C2 f^{1+1/mu2}            for 0 <= f <= F0
///   (Q3) Q(l f) >= l^{1+1/mu3} Q(f)        for f >= 0, 0 <= l <= 1
///   (Q4) Q'' > 0 on f > 0 and Q'(0) = 0
///   (Q5) C3 Q''(f) <= Q''(l f) <= C4 Q''(f) for l near 1
struct AssumptionConstants {
    double mu1 = 0.5, mu2 = 0.5, mu3 = 0.5;
    double C1 = 1, C2 = 1, C3 = 1, C4 = 1;
    double F0 = 1;
};

/// Tabulated Q on a log-spaced f-grid. Q' is estimated at the nodes and
/// interpolated with a monotone cubic (PCHIP); Q is the exact integral of that
/// interpolant, so it matches the table only to interpolation accuracy. Outside
/// the table both ends are continued as power laws fitted to the two outermost nodes.
class TabulatedCasimir {
public:
    TabulatedCasimir(std::vector<double> f, std::vector<double> Q);

    double Q(double f) const;
    double dQ(double f) const;
    double d2Q(double f) const;

    /// True when the nodal Q' values are strictly increasing and the lower
    /// power-law continuation has exponent > 1 (so that Q'(0) = 0).
    bool derivative_monotone() const { return monotone_; }
    double lower_exponent() const { return p_lo_; }
    const std::vector<double>& f_nodes() const { return f_; }
    const std::vector<double>& Q_nodes() const { return Q_; }

private:
    struct Impl;
    std::vector<double> f_, Q_, dQ_;
    double p_lo_ = 2, p_hi_ = 2;
    bool monotone_ = true;
    std::shared_ptr<const Impl> impl_;
};

/// Convex Casimir function Q with derivatives. Immutable after construction.
class CasimirModel {
public:
    /// Q(f) = c f^{1+1/mu}. Declared constants default to the exact values
    /// (mu1 = mu2 = mu3 = mu, C1 = C2 = c, C3/C4 from Q''(l f)/Q''(f) = l^{1/mu-1} on [1/2, 2]).
    static CasimirModel polytrope(double mu, double c = 1.0);

    /// Q(f) = k1 f^{1+1/m1} + k2 f^{1+1/m2} with 0 < m1 < m2 < 1.
    /// Declared constants: mu1 = m1, mu2 = m2, mu3 = m1, C1 = k1,
    /// C2 = k1 F0^{1/m1-1/m2} + k2 (the bound for f <= F0), C3/C4 as for the polytrope terms.
    static CasimirModel double_power(double m1, double m2, double k1, double k2, double F0 = 1.0);

    static CasimirModel custom(TabulatedCasimir table, AssumptionConstants declared);

    CasimirKind kind() const { return kind_; }
    double Q(double f) const;
    double dQ(double f) const;
    double d2Q(double f) const;

    const AssumptionConstants& declared() const { return decl_; }
    CasimirModel with_declared(AssumptionConstants decl) const;

    /// Polytrope parameters (valid for kind Polytrope).
    double mu() const { return e1_; }
    double coefficient() const { return k1_; }
    /// Double-power parameters (exponents m1, m2 and coefficients k1, k2).
    double exponent1() const { return e1_; }
    double exponent2() const { return e2_; }
    double coefficient1() const { return k1_; }
    double coefficient2() const { return k2_; }
    const TabulatedCasimir* table() const { return table_.get(); }

    /// alpha = 1/(1 - mu3), always derived from the declared mu3.
    double alpha() const { return 1.0 / (1.0 - decl_.mu3); }

    /// Short human-readable description, stable across runs (used for hashing).
    std::string describe() const;

private:
    CasimirModel() = default;
    CasimirKind kind_ = CasimirKind::Polytrope;
    double e1_ = 0.5, e2_ = 0.5, k1_ = 1, k2_ = 0;
    std::shared_ptr<const TabulatedCasimir> table_;
    AssumptionConstants decl_;
};

/// Inverse q of Q' on [0, inf), extended by q(eps) = 0 for eps < 0, together
/// with the energy integrals of q used to reduce velocity integrals to 1D.
class InverseQ {
public:
    /// Throws ModelDefinitionError for a custom model with non-monotone Q'.
    explicit InverseQ(CasimirModel model);

    const CasimirModel& model() const { return model_; }

    /// q(eps): the f >= 0 with Q'(f) = eps; exactly 0 for eps <= 0.
    double q(double eps) const;
    /// Same as q() via the bracketing root-finder regardless of kind (oracle path).
    double q_root_find(double eps) const;

    /// G(s) = int_0^s q(t) dt (0 for s <= 0).
    double q_antiderivative(double s) const;
    /// int_0^s (s - t) q(t) dt = int_0^s G(t) dt.
    double kinetic_moment(double s) const;
    /// int_0^s t q(t) dt.
    double energy_moment(double s) const;
    /// int_0^s Q(q(t)) dt.
    double casimir_moment(double s) const;
    /// int_0^s Q(a q(t)) dt for a density amplitude factor a > 0.
    double casimir_moment_scaled(double s, double a) const;

private:
    CasimirModel model_;
    double poly_k_ = 0;   // q(t) = poly_k t^mu for polytropes
};

struct AssumptionCheck {
    std::string name;
    bool pass = false;
    double worst = 0;      ///< worst normalized violation margin found (<= 0 means satisfied)
    std::string detail;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;
    bool all_pass() const;
    const AssumptionCheck* find(const std::string& name) const;
};

/// Default density sample: 0 followed by 400 log-spaced points in [1e-6 F0, 1e3 F0].
std::vector<double> default_f_grid(double F0);

/// Samples (Q1)-(Q5) and the standing exponent restrictions on `f_grid`.
/// Inequalities are tested with 1e-9 relative slack.
ValidationReport validate_assumptions(const CasimirModel& model, std::span<const double> f_grid);

}  // namespace flatvp
