#include "flatvp/elliptic.hpp"
#include "flatvp/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace flatvp {

double elliptic_k_complement(double kp)
{
    if(!(kp > 0 && kp <= 1))
        throw DomainError("elliptic_k: complementary modulus must lie in (0,1], got " + std::to_string(kp));
    double a = 1, b = kp;
    // quadratic convergence: at most ~6 passes for kp >= 1e-300
    for(int iter = 0; iter < 64; ++iter) {
        if(std::fabs(a - b) <= 1e-16 * a) break;
        const double an = 0.5 * (a + b);
        b = std::sqrt(a * b);
        a = an;
    }
    return std::numbers::pi / (a + b);
}

double elliptic_k(double xi)
{
    if(!(xi >= 0 && xi < 1))
        throw DomainError("elliptic_k: modulus must lie in [0,1), got " + std::to_string(xi));
    return elliptic_k_complement(std::sqrt((1 - xi) * (1 + xi)));
}

double kernel_modulus(double r, double s)
{
    const double sum = r + s;
    return sum > 0 ? 2 * std::sqrt(r * s) / sum : 0.0;
}

double kernel_complement(double r, double s)
{
    const double sum = r + s;
    return sum > 0 ? std::fabs(r - s) / sum : 1.0;
}

KBoundReport kbound_check(std::span<const double> xi_grid, double constant)
{
    KBoundReport rep;
    rep.constant = constant;
    for(double xi : xi_grid) {
        const double ratio = elliptic_k(xi) / (1 - std::log1p(-xi));
        if(ratio > rep.max_ratio) {
            rep.max_ratio = ratio;
            rep.argmax_xi = xi;
        }
    }
    rep.pass = rep.max_ratio <= constant;
    return rep;
}

}  // namespace flatvp
