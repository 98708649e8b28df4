#pragma once
#include <span>

namespace flatvp {

/// Complete elliptic integral of the first kind
///   K(xi) = int_0^{pi/2} dphi / sqrt(1 - xi^2 sin^2 phi),  0 <= xi < 1,
/// evaluated by the arithmetic-geometric mean, K = pi / (2 AGM(1, sqrt(1 - xi^2))).
/// Throws DomainError outside [0, 1).
double elliptic_k(double xi);

/// Same integral parametrized by the complementary modulus kp = sqrt(1 - xi^2),
/// 0 < kp <= 1. Avoids the cancellation in 1 - xi^2 when xi is close to 1.
double elliptic_k_complement(double kp);

/// Modulus of the axisymmetric flat-potential kernel, 2 sqrt(r s) / (r + s).
double kernel_modulus(double r, double s);

/// Complementary modulus of the same kernel, |r - s| / (r + s).
double kernel_complement(double r, double s);

struct KBoundReport {
    double max_ratio = 0;   ///< max over the grid of K(xi) / (1 - ln(1 - xi))
    double argmax_xi = 0;
    double constant = 0;
    bool pass = false;
};

/// Checks the logarithmic bound K(xi) <= C (1 - ln(1 - xi)) on a set of moduli.
KBoundReport kbound_check(std::span<const double> xi_grid, double constant);

}  // namespace flatvp
