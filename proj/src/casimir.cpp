#include "flatvp/casimir.hpp"
#include "flatvp/errors.hpp"

#include <math.h>  // pchip calls unqualified isnan
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace flatvp {

namespace {

using boost::math::interpolators::pchip;

// Q = sum k_i f^{b_i}. With t = Q'(f) every energy moment up to F = q(s) is a
// finite sum of powers of F.
struct PowerSum {
    double k[2], b[2];
    int n;

    explicit PowerSum(const CasimirModel& m)
        : k{m.coefficient1(), m.coefficient2()},
          b{1 + 1 / m.exponent1(), 1 + 1 / m.exponent2()},
          n(m.kind() == CasimirKind::DoublePower ? 2 : 1) {}

    // int_0^F c f^x df
    static double mono(double c, double x, double F) { return c * std::pow(F, x + 1) / (x + 1); }

    /// int_0^s t q(t) dt = int_0^F Q'(f) f Q''(f) df
    double energy(double F) const
    {
        double v = 0;
        for(int i = 0; i < n; ++i)
            for(int j = 0; j < n; ++j)
                v += mono(k[i] * b[i] * k[j] * b[j] * (b[j] - 1), b[i] + b[j] - 2, F);
        return v;
    }
    /// int_0^s Q(a q(t)) dt = int_0^F Q(a f) Q''(f) df
    double casimir(double F, double a) const
    {
        double v = 0;
        for(int i = 0; i < n; ++i)
            for(int j = 0; j < n; ++j)
                v += mono(k[i] * std::pow(a, b[i]) * k[j] * b[j] * (b[j] - 1), b[i] + b[j] - 2, F);
        return v;
    }
    double Q(double F) const
    {
        double v = 0;
        for(int i = 0; i < n; ++i) v += k[i] * std::pow(F, b[i]);
        return v;
    }
};

// integrate() is non-const in this boost version; one instance per thread
boost::math::quadrature::tanh_sinh<double>& integrator()
{
    thread_local boost::math::quadrature::tanh_sinh<double> ts;
    return ts;
}

/// int_0^s g(t) dt for an integrand with algebraic behaviour at t = 0 and t = s.
template<class F>
double integrate_energy(F g, double s, double tol = 1e-10)
{
    if(!(s > 0)) return 0.0;
    return integrator().integrate(g, 0.0, s, tol);
}

std::string fmt17(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

std::string to_string(CasimirKind kind)
{
    switch(kind) {
    case CasimirKind::Polytrope: return "polytrope";
    case CasimirKind::DoublePower: return "double_power";
    case CasimirKind::Custom: return "custom";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// TabulatedCasimir

struct TabulatedCasimir::Impl {
    pchip<std::vector<double>> dQ;
    std::vector<double> slope;   // d2Q at the nodes
    std::vector<double> Qc;      // Q at the nodes
    double integral(const std::vector<double>& f, const std::vector<double>& y, double x) const;
};

TabulatedCasimir::TabulatedCasimir(std::vector<double> f, std::vector<double> Q)
    : f_(std::move(f)), Q_(std::move(Q))
{
    const std::size_t n = f_.size();
    if(n < 4 || Q_.size() != n)
        throw InputError("tabulated Casimir: need at least 4 (f,Q) pairs of equal length");
    for(std::size_t i = 0; i < n; ++i) {
        if(!(f_[i] > 0) || !std::isfinite(f_[i]) || !(Q_[i] > 0) || !std::isfinite(Q_[i]))
            throw InputError("tabulated Casimir: f and Q must be positive and finite (row " +
                             std::to_string(i) + ")");
        if(i > 0 && !(f_[i] > f_[i - 1]))
            throw InputError("tabulated Casimir: f must be strictly increasing (row " + std::to_string(i) + ")");
    }
    // dQ/df = (Q/f) dlnQ/dlnf, with the log-log slope from 3-point differences
    std::vector<double> lf(n), lQ(n), slope(n);
    for(std::size_t i = 0; i < n; ++i) {
        lf[i] = std::log(f_[i]);
        lQ[i] = std::log(Q_[i]);
    }
    // second-order one-sided stencils at the ends
    auto one_sided = [&](std::size_t i0, std::size_t i1, std::size_t i2) {
        const double h0 = lf[i1] - lf[i0], h1 = lf[i2] - lf[i1];
        return -(2 * h0 + h1) / (h0 * (h0 + h1)) * lQ[i0] + (h0 + h1) / (h0 * h1) * lQ[i1] -
               h0 / (h1 * (h0 + h1)) * lQ[i2];
    };
    slope[0] = one_sided(0, 1, 2);
    slope[n - 1] = one_sided(n - 1, n - 2, n - 3);
    for(std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = lf[i] - lf[i - 1], h1 = lf[i + 1] - lf[i];
        slope[i] = (-h1 / (h0 * (h0 + h1))) * lQ[i - 1] + ((h1 - h0) / (h0 * h1)) * lQ[i] +
                   (h0 / (h1 * (h0 + h1))) * lQ[i + 1];
    }
    dQ_.resize(n);
    for(std::size_t i = 0; i < n; ++i) dQ_[i] = slope[i] * Q_[i] / f_[i];
    p_lo_ = slope[0];
    p_hi_ = slope[n - 1];
    monotone_ = p_lo_ > 1;
    for(std::size_t i = 1; i < n; ++i)
        if(!(dQ_[i] > dQ_[i - 1])) monotone_ = false;

    auto fx = f_, dqy = dQ_;
    auto impl = std::make_shared<Impl>(Impl{pchip<std::vector<double>>(std::move(fx), std::move(dqy)), {}, {}});
    // Q is the integral of the Q' interpolant (cubic Hermite per cell), so that
    // Q' is its exact derivative; the lower power-law tail carries Q_0.
    impl->slope.resize(n);
    impl->Qc.resize(n);
    for(std::size_t i = 0; i < n; ++i) impl->slope[i] = impl->dQ.prime(f_[i]);
    impl->Qc[0] = Q_[0];
    for(std::size_t i = 0; i + 1 < n; ++i) {
        const double h = f_[i + 1] - f_[i];
        impl->Qc[i + 1] = impl->Qc[i] + h * (0.5 * (dQ_[i] + dQ_[i + 1]) + h * (impl->slope[i] - impl->slope[i + 1]) / 12);
    }
    impl_ = std::move(impl);
}

double TabulatedCasimir::Impl::integral(const std::vector<double>& f, const std::vector<double>& y, double x) const
{
    const std::size_t i = std::min<std::size_t>(std::upper_bound(f.begin(), f.end(), x) - f.begin(), f.size() - 1) - 1;
    const double h = f[i + 1] - f[i], T = (x - f[i]) / h;
    const double T2 = T * T, T3 = T2 * T, T4 = T3 * T;
    return Qc[i] + h * (y[i] * (T - T3 + T4 / 2) + h * slope[i] * (T2 / 2 - 2 * T3 / 3 + T4 / 4) +
                        y[i + 1] * (T3 - T4 / 2) + h * slope[i + 1] * (T4 / 4 - T3 / 3));
}

double TabulatedCasimir::Q(double f) const
{
    if(f <= 0) return 0.0;
    if(f < f_.front()) return Q_.front() * std::pow(f / f_.front(), p_lo_);
    if(f >= f_.back())
        return impl_->Qc.back() + dQ_.back() * f_.back() / p_hi_ * (std::pow(f / f_.back(), p_hi_) - 1);
    return impl_->integral(f_, dQ_, f);
}

double TabulatedCasimir::dQ(double f) const
{
    if(f <= 0) return 0.0;
    if(f < f_.front()) return p_lo_ * Q(f) / f;
    if(f > f_.back()) return dQ_.back() * std::pow(f / f_.back(), p_hi_ - 1);
    return impl_->dQ(f);
}

double TabulatedCasimir::d2Q(double f) const
{
    if(f <= 0) {
        if(p_lo_ > 2) return 0.0;
        if(p_lo_ == 2) return 2 * Q_.front() / (f_.front() * f_.front());
        return std::numeric_limits<double>::infinity();
    }
    if(f < f_.front()) return p_lo_ * (p_lo_ - 1) * Q(f) / (f * f);
    if(f > f_.back()) return dQ_.back() * (p_hi_ - 1) / f_.back() * std::pow(f / f_.back(), p_hi_ - 2);
    return impl_->dQ.prime(f);
}

// ---------------------------------------------------------------------------
// CasimirModel

namespace {
void check_exponent(double mu, const char* what)
{
    if(!(mu > 0 && mu < 1))
        throw InputError(std::string("Casimir model: exponent ") + what + " must lie in (0,1)");
}
}  // namespace

CasimirModel CasimirModel::polytrope(double mu, double c)
{
    check_exponent(mu, "mu");
    if(!(c > 0)) throw InputError("Casimir model: polytrope coefficient c must be positive");
    CasimirModel m;
    m.kind_ = CasimirKind::Polytrope;
    m.e1_ = m.e2_ = mu;
    m.k1_ = c;
    m.k2_ = 0;
    const double p = 1 / mu - 1;
    m.decl_ = {mu, mu, mu, c, c, std::pow(0.5, p), std::pow(2.0, p), 1.0};
    return m;
}

CasimirModel CasimirModel::double_power(double m1, double m2, double k1, double k2, double F0)
{
    check_exponent(m1, "mu1");
    check_exponent(m2, "mu2");
    if(!(m1 < m2)) throw InputError("Casimir model: double power requires mu1 < mu2");
    if(!(k1 > 0 && k2 > 0)) throw InputError("Casimir model: coefficients C1, C2 must be positive");
    if(!(F0 > 0)) throw InputError("Casimir model: F0 must be positive");
    CasimirModel m;
    m.kind_ = CasimirKind::DoublePower;
    m.e1_ = m1;
    m.e2_ = m2;
    m.k1_ = k1;
    m.k2_ = k2;
    const double p1 = 1 / m1 - 1, p2 = 1 / m2 - 1;
    m.decl_ = {m1, m2, m1, k1, k1 * std::pow(F0, 1 / m1 - 1 / m2) + k2,
               std::min(std::pow(0.5, p1), std::pow(0.5, p2)),
               std::max(std::pow(2.0, p1), std::pow(2.0, p2)), F0};
    return m;
}

CasimirModel CasimirModel::custom(TabulatedCasimir table, AssumptionConstants declared)
{
    CasimirModel m;
    m.kind_ = CasimirKind::Custom;
    m.table_ = std::make_shared<const TabulatedCasimir>(std::move(table));
    m.decl_ = declared;
    return m;
}

CasimirModel CasimirModel::with_declared(AssumptionConstants decl) const
{
    CasimirModel m = *this;
    m.decl_ = decl;
    return m;
}

double CasimirModel::Q(double f) const
{
    if(f <= 0) return 0.0;
    switch(kind_) {
    case CasimirKind::Polytrope: return k1_ * std::pow(f, 1 + 1 / e1_);
    case CasimirKind::DoublePower: return k1_ * std::pow(f, 1 + 1 / e1_) + k2_ * std::pow(f, 1 + 1 / e2_);
    case CasimirKind::Custom: return table_->Q(f);
    }
    return 0.0;
}

double CasimirModel::dQ(double f) const
{
    if(f <= 0) return 0.0;
    switch(kind_) {
    case CasimirKind::Polytrope: return k1_ * (1 + 1 / e1_) * std::pow(f, 1 / e1_);
    case CasimirKind::DoublePower:
        return k1_ * (1 + 1 / e1_) * std::pow(f, 1 / e1_) + k2_ * (1 + 1 / e2_) * std::pow(f, 1 / e2_);
    case CasimirKind::Custom: return table_->dQ(f);
    }
    return 0.0;
}

double CasimirModel::d2Q(double f) const
{
    if(kind_ == CasimirKind::Custom) return table_->d2Q(f);
    if(f <= 0) return 0.0;
    double v = k1_ * (1 + 1 / e1_) / e1_ * std::pow(f, 1 / e1_ - 1);
    if(kind_ == CasimirKind::DoublePower) v += k2_ * (1 + 1 / e2_) / e2_ * std::pow(f, 1 / e2_ - 1);
    return v;
}

std::string CasimirModel::describe() const
{
    std::ostringstream os;
    os << to_string(kind_) << '(';
    switch(kind_) {
    case CasimirKind::Polytrope: os << "mu=" << fmt17(e1_) << ",c=" << fmt17(k1_); break;
    case CasimirKind::DoublePower:
        os << "mu1=" << fmt17(e1_) << ",mu2=" << fmt17(e2_) << ",C1=" << fmt17(k1_) << ",C2=" << fmt17(k2_);
        break;
    case CasimirKind::Custom:
        os << "nodes=" << table_->f_nodes().size();
        for(std::size_t i = 0; i < table_->f_nodes().size(); ++i)
            os << ';' << fmt17(table_->f_nodes()[i]) << ':' << fmt17(table_->Q_nodes()[i]);
        break;
    }
    os << ")[mu1=" << fmt17(decl_.mu1) << ",mu2=" << fmt17(decl_.mu2) << ",mu3=" << fmt17(decl_.mu3)
       << ",C1=" << fmt17(decl_.C1) << ",C2=" << fmt17(decl_.C2) << ",C3=" << fmt17(decl_.C3)
       << ",C4=" << fmt17(decl_.C4) << ",F0=" << fmt17(decl_.F0) << ']';
    return os.str();
}

// ---------------------------------------------------------------------------
// InverseQ

InverseQ::InverseQ(CasimirModel model) : model_(std::move(model))
{
    if(model_.kind() == CasimirKind::Custom && !model_.table()->derivative_monotone())
        throw ModelDefinitionError("tabulated Casimir: Q' is not strictly increasing (or Q'(0) != 0); "
                                   "the inverse q is undefined");
    if(model_.kind() == CasimirKind::Polytrope) {
        const double mu = model_.mu(), c = model_.coefficient();
        poly_k_ = std::pow(mu / (c * (mu + 1)), mu);
    }
}

double InverseQ::q(double eps) const
{
    if(!std::isfinite(eps)) throw InputError("q: non-finite energy argument");
    if(eps <= 0) return 0.0;
    if(model_.kind() == CasimirKind::Polytrope) return poly_k_ * std::pow(eps, model_.mu());
    return q_root_find(eps);
}

double InverseQ::q_root_find(double eps) const
{
    if(!std::isfinite(eps)) throw InputError("q: non-finite energy argument");
    if(eps <= 0) return 0.0;
    // bracket in log f: dQ(lo) < eps <= dQ(hi)
    double lo = 1, hi = 1;
    int guard = 0;
    if(model_.dQ(hi) < eps) {
        while(model_.dQ(hi) < eps) {
            lo = hi;
            hi *= 2;
            if(++guard > 2000 || !std::isfinite(hi))
                throw ConvergenceError("q: root bracket exhausted for eps = " + fmt17(eps));
        }
    } else {
        while(model_.dQ(lo) >= eps) {
            hi = lo;
            lo *= 0.5;
            if(++guard > 2000 || lo == 0)
                throw ConvergenceError("q: root bracket exhausted for eps = " + fmt17(eps));
        }
    }
    if(model_.kind() == CasimirKind::Custom) {
        // bisection in log space to 1e-12, then one Newton polish
        while(hi / lo - 1 > 1e-12) {
            const double mid = std::sqrt(lo * hi);
            if(model_.dQ(mid) < eps)
                lo = mid;
            else
                hi = mid;
        }
        double f = std::sqrt(lo * hi);
        const double curv = model_.d2Q(f);
        if(curv > 0) {
            const double polished = f - (model_.dQ(f) - eps) / curv;
            if(polished >= lo && polished <= hi) f = polished;
        }
        return f;
    }
    // safeguarded Newton on g(u) = ln Q'(e^u) - ln eps
    const double leps = std::log(eps);
    auto g = [&](double u) {
        const double f = std::exp(u);
        const double d1 = model_.dQ(f);
        return std::make_pair(std::log(d1) - leps, f * model_.d2Q(f) / d1);
    };
    std::uintmax_t iters = 200;
    const double u = boost::math::tools::newton_raphson_iterate(g, 0.5 * (std::log(lo) + std::log(hi)),
                                                                std::log(lo), std::log(hi), 52, iters);
    return std::exp(u);
}

double InverseQ::q_antiderivative(double s) const
{
    if(!std::isfinite(s)) throw InputError("q_antiderivative: non-finite argument");
    if(s <= 0) return 0.0;
    if(model_.kind() == CasimirKind::Polytrope) {
        const double mu = model_.mu();
        return poly_k_ * std::pow(s, mu + 1) / (mu + 1);
    }
    // int_0^s q = s F - Q(F) with F = q(s), since Q(0) = 0 and Q' is exactly inverted by q
    const double F = q(s);
    return s * F - model_.Q(F);
}

double InverseQ::kinetic_moment(double s) const
{
    if(s <= 0) return 0.0;
    if(model_.kind() == CasimirKind::Polytrope) {
        const double mu = model_.mu();
        return poly_k_ * std::pow(s, mu + 2) / ((mu + 1) * (mu + 2));
    }
    if(model_.kind() == CasimirKind::DoublePower) return s * q_antiderivative(s) - energy_moment(s);
    return integrate_energy([this, s](double t) { return (s - t) * q(t); }, s);
}

double InverseQ::energy_moment(double s) const
{
    if(s <= 0) return 0.0;
    if(model_.kind() == CasimirKind::Polytrope) {
        const double mu = model_.mu();
        return poly_k_ * std::pow(s, mu + 2) / (mu + 2);
    }
    if(model_.kind() == CasimirKind::DoublePower) return PowerSum(model_).energy(q(s));
    return integrate_energy([this](double t) { return t * q(t); }, s);
}

double InverseQ::casimir_moment(double s) const
{
    if(s <= 0) return 0.0;
    if(model_.kind() == CasimirKind::Polytrope) {
        // Q(q(t)) = mu/(mu+1) t q(t) for Q = c f^{1+1/mu}
        const double mu = model_.mu();
        return mu / (mu + 1) * energy_moment(s);
    }
    if(model_.kind() == CasimirKind::DoublePower) return PowerSum(model_).casimir(q(s), 1.0);
    return integrate_energy([this](double t) { return model_.Q(q(t)); }, s);
}

double InverseQ::casimir_moment_scaled(double s, double a) const
{
    if(s <= 0) return 0.0;
    if(model_.kind() != CasimirKind::Custom) return PowerSum(model_).casimir(q(s), a);
    return integrate_energy([this, a](double t) { return model_.Q(a * q(t)); }, s, 1e-12);
}

// ---------------------------------------------------------------------------
// validation

bool ValidationReport::all_pass() const
{
    return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.pass; });
}

const AssumptionCheck* ValidationReport::find(const std::string& name) const
{
    for(const auto& c : checks)
        if(c.name == name) return &c;
    return nullptr;
}

std::vector<double> default_f_grid(double F0)
{
    std::vector<double> grid{0.0};
    const int n = 400;
    const double lo = std::log(1e-6 * F0), hi = std::log(1e3 * F0);
    for(int i = 0; i < n; ++i) grid.push_back(std::exp(lo + (hi - lo) * i / (n - 1)));
    return grid;
}

ValidationReport validate_assumptions(const CasimirModel& model, std::span<const double> f_grid)
{
    const AssumptionConstants& d = model.declared();
    if(f_grid.size() < 100) throw InputError("validate_assumptions: f grid needs at least 100 points");
    const auto [mn, mx] = std::minmax_element(f_grid.begin(), f_grid.end());
    if(*mn != 0 || !(*mx > d.F0))
        throw InputError("validate_assumptions: f grid must cover [0, f_max] with f_max > F0");

    constexpr double slack = 1e-9;
    ValidationReport rep;

    AssumptionCheck standing;
    standing.name = "standing";
    standing.pass = d.mu1 > 0 && d.mu1 < 1 && d.mu2 > 0 && d.mu2 < 1 && d.mu3 > 0 && d.mu3 < 1 && d.C1 > 0 &&
                    d.C2 > 0 && d.C3 > 0 && d.C4 > 0 && d.F0 > 0;
    if(!standing.pass) standing.detail = "exponents must lie in (0,1) and constants be positive";
    rep.checks.push_back(standing);

    // (Q1): Q(f) >= C1 f^{1+1/mu1}, f >= F0
    AssumptionCheck q1;
    q1.name = "Q1";
    q1.worst = -std::numeric_limits<double>::infinity();
    for(double f : f_grid) {
        if(f < d.F0) continue;
        const double bound = d.C1 * std::pow(f, 1 + 1 / d.mu1);
        const double v = (bound - model.Q(f)) / bound;
        if(v > q1.worst) {
            q1.worst = v;
            q1.detail = "worst at f=" + fmt17(f);
        }
    }
    q1.pass = q1.worst <= slack;
    rep.checks.push_back(q1);

    // (Q2): Q(f) <= C2 f^{1+1/mu2}, 0 <= f <= F0
    AssumptionCheck q2;
    q2.name = "Q2";
    q2.worst = -std::numeric_limits<double>::infinity();
    for(double f : f_grid) {
        if(f > d.F0) continue;
        const double bound = d.C2 * std::pow(f, 1 + 1 / d.mu2);
        const double Qf = model.Q(f);
        const double v = bound > 0 ? (Qf - bound) / bound : (Qf > 0 ? 1.0 : 0.0);
        if(v > q2.worst) {
            q2.worst = v;
            q2.detail = "worst at f=" + fmt17(f);
        }
    }
    q2.pass = q2.worst <= slack;
    rep.checks.push_back(q2);

    // (Q3): Q(l f) >= l^{1+1/mu3} Q(f), 0 <= l <= 1
    AssumptionCheck q3;
    q3.name = "Q3";
    q3.worst = -std::numeric_limits<double>::infinity();
    for(int il = 0; il <= 100; ++il) {
        const double lam = il / 100.0;
        const double pw = std::pow(lam, 1 + 1 / d.mu3);
        for(double f : f_grid) {
            const double Qf = model.Q(f);
            if(!(Qf > 0)) continue;
            const double v = (pw * Qf - model.Q(lam * f)) / Qf;
            if(v > q3.worst) {
                q3.worst = v;
                q3.detail = "worst at f=" + fmt17(f) + ", lambda=" + fmt17(lam);
            }
        }
    }
    q3.pass = q3.worst <= slack;
    rep.checks.push_back(q3);

    // (Q4): Q'' > 0 for f > 0 and Q'(0) = 0
    AssumptionCheck q4;
    q4.name = "Q4";
    q4.pass = true;
    if(model.kind() == CasimirKind::Custom && !model.table()->derivative_monotone()) {
        q4.pass = false;
        q4.detail = "tabulated Q' is not strictly increasing";
    }
    for(double f : f_grid) {
        if(f <= 0) continue;
        const double c = model.d2Q(f);
        if(!(c > 0)) {
            q4.pass = false;
            q4.worst = std::max(q4.worst, 1.0);
            q4.detail = "Q'' <= 0 at f=" + fmt17(f);
            break;
        }
    }
    if(model.dQ(0.0) != 0) {
        q4.pass = false;
        q4.detail = "Q'(0) != 0";
    }
    rep.checks.push_back(q4);

    // (Q5): C3 Q''(f) <= Q''(l f) <= C4 Q''(f), l in [1/2, 2]
    AssumptionCheck q5;
    q5.name = "Q5";
    q5.worst = -std::numeric_limits<double>::infinity();
    for(int il = 0; il <= 40; ++il) {
        const double lam = 0.5 * std::pow(4.0, il / 40.0);
        for(double f : f_grid) {
            if(f <= 0) continue;
            const double base = model.d2Q(f);
            if(!(base > 0) || !std::isfinite(base)) continue;
            const double r = model.d2Q(lam * f) / base;
            const double v = std::max((d.C3 - r) / d.C3, (r - d.C4) / d.C4);
            if(v > q5.worst) {
                q5.worst = v;
                q5.detail = "worst at f=" + fmt17(f) + ", lambda=" + fmt17(lam);
            }
        }
    }
    q5.pass = q5.worst <= slack;
    rep.checks.push_back(q5);
    return rep;
}

}  // namespace flatvp
