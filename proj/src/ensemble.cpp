#include "flatvp/ensemble.hpp"
#include "flatvp/errors.hpp"
#include "flatvp/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace flatvp {

void ParticleEnsemble::resize(std::size_t n)
{
    x1.resize(n);
    x2.resize(n);
    v1.resize(n);
    v2.resize(n);
    w.resize(n);
}

double ParticleEnsemble::total_mass() const
{
    return deterministic_sum(size(), [&](std::size_t i) { return w[i]; });
}

double ParticleEnsemble::angular_momentum() const
{
    return deterministic_sum(size(), [&](std::size_t i) { return w[i] * (x1[i] * v2[i] - x2[i] * v1[i]); });
}

double ParticleEnsemble::angular_momentum_abs() const
{
    return deterministic_sum(size(), [&](std::size_t i) { return w[i] * std::fabs(x1[i] * v2[i] - x2[i] * v1[i]); });
}

double ParticleEnsemble::max_radius() const
{
    double r = 0;
    for(std::size_t i = 0; i < size(); ++i) r = std::max(r, std::sqrt(x1[i] * x1[i] + x2[i] * x2[i]));
    return r;
}

void ParticleEnsemble::validate() const
{
    const std::size_t n = w.size();
    if(x1.size() != n || x2.size() != n || v1.size() != n || v2.size() != n)
        throw InputError("ParticleEnsemble: coordinate arrays differ in length");
    for(std::size_t i = 0; i < n; ++i) {
        if(!(w[i] > 0) || !std::isfinite(w[i])) throw InputError("ParticleEnsemble: weights must be positive and finite");
        if(!std::isfinite(x1[i]) || !std::isfinite(x2[i]) || !std::isfinite(v1[i]) || !std::isfinite(v2[i]))
            throw NonFiniteError("ParticleEnsemble: non-finite coordinate", i);
    }
}

}  // namespace flatvp
