#pragma once
#include <cstddef>
#include <vector>

namespace flatvp {

/// Weighted planar phase-space samples (x in R^2, v in R^2) of a distribution f.
struct ParticleEnsemble {
    std::vector<double> x1, x2, v1, v2, w;
    double time = 0;

    std::size_t size() const { return w.size(); }
    void resize(std::size_t n);

    double total_mass() const;
    /// sum_i w_i (x1 v2 - x2 v1)
    double angular_momentum() const;
    /// sum_i w_i |x1 v2 - x2 v1|
    double angular_momentum_abs() const;
    double max_radius() const;

    /// Throws InputError on size mismatch, non-positive weights or non-finite coordinates.
    void validate() const;
};

}  // namespace flatvp
