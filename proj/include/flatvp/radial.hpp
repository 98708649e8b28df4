#pragma once
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace flatvp {

enum class Spacing { Uniform, Log, Hybrid, Explicit };

std::string to_string(Spacing s);

/// Strictly increasing radial nodes r_0 < r_1 < ... < r_{n-1}, r_0 >= 0, n >= 16.
/// Functions on the grid are continuous piecewise-linear in r between nodes and
/// vanish beyond the last node. Copies share the immutable node storage.
class RadialGrid {
public:
    static constexpr std::size_t min_nodes = 16;

    static RadialGrid uniform(std::size_t n, double r_max);
    /// Node 0 at the origin, the remaining n-1 nodes log-spaced in [r_min, r_max].
    static RadialGrid logarithmic(std::size_t n, double r_min, double r_max);
    /// r = r_core sinh(u) with u uniform: spacing ~ constant inside r_core and
    /// ~ proportional to r outside it.
    static RadialGrid hybrid(std::size_t n, double r_core, double r_max);
    static RadialGrid from_nodes(std::vector<double> nodes);

    std::size_t size() const { return d_->nodes.size(); }
    double r(std::size_t i) const { return d_->nodes[i]; }
    double r_max() const { return d_->nodes.back(); }
    std::span<const double> nodes() const { return d_->nodes; }
    Spacing spacing() const { return d_->spacing; }
    /// Core radius of a hybrid grid (0 otherwise).
    double r_core() const { return d_->r_core; }

    /// A_i = int hat_i(r) 2 pi r dr: the area carried by node i, so that the
    /// mass of a piecewise-linear density is sum_i A_i rho_i.
    std::span<const double> areas() const { return d_->areas; }

    /// Index i of the cell [r_i, r_{i+1}) containing r; npos when r is outside
    /// [r_0, r_max). O(1) via a bucket table.
    std::size_t locate(double r) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    /// Same relative layout with every node multiplied by factor > 0.
    RadialGrid scaled(double factor) const;

    /// 64-bit FNV-1a hash of the node bit patterns, as 16 hex digits.
    std::string hash() const;

private:
    struct Data {
        std::vector<double> nodes;
        std::vector<double> areas;
        std::vector<std::uint32_t> bucket_cell;
        double bucket_inv = 0;
        Spacing spacing = Spacing::Explicit;
        double r_core = 0;
    };
    RadialGrid(std::vector<double> nodes, Spacing spacing, double r_core);
    std::shared_ptr<const Data> d_;
};

/// Values of a radial function at the grid nodes.
struct RadialProfile {
    RadialGrid grid;
    std::vector<double> values;

    RadialProfile(RadialGrid g, std::vector<double> v);
    RadialProfile(RadialGrid g);   ///< zero profile

    std::size_t size() const { return values.size(); }
    /// Linear interpolation; 0 beyond the last node.
    double at(double r) const;
    /// 2 pi int r f(r) dr for the piecewise-linear interpolant.
    double integral() const;
};

/// Writes `r,value` with a one-line header; `comments` are emitted first as
/// '#'-prefixed lines. All numbers at 17 significant digits.
void write_profile_csv(std::ostream& os, const RadialProfile& p,
                       const std::vector<std::string>& comments = {});
/// Reads `r,value` (or any two leading columns); '#' lines and the header are skipped.
RadialProfile read_profile_csv(std::istream& is);

/// "%.17g" formatting used by all text outputs.
std::string format_double(double x);

}  // namespace flatvp
