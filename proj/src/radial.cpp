#include "flatvp/radial.hpp"
#include "flatvp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace flatvp {

std::string to_string(Spacing s)
{
    switch(s) {
    case Spacing::Uniform: return "uniform";
    case Spacing::Log: return "log";
    case Spacing::Hybrid: return "hybrid";
    case Spacing::Explicit: return "explicit";
    }
    return "unknown";
}

std::string format_double(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

RadialGrid::RadialGrid(std::vector<double> nodes, Spacing spacing, double r_core)
{
    const std::size_t n = nodes.size();
    if(n < min_nodes) throw InputError("RadialGrid: need at least 16 nodes, got " + std::to_string(n));
    if(!(nodes[0] >= 0)) throw InputError("RadialGrid: first node must be >= 0");
    for(std::size_t i = 0; i < n; ++i) {
        if(!std::isfinite(nodes[i])) throw InputError("RadialGrid: non-finite node");
        if(i > 0 && !(nodes[i] > nodes[i - 1]))
            throw InputError("RadialGrid: nodes must be strictly increasing (node " + std::to_string(i) + ")");
    }
    auto d = std::make_shared<Data>();
    d->spacing = spacing;
    d->r_core = r_core;
    d->areas.assign(n, 0.0);
    double min_width = nodes[1] - nodes[0];
    for(std::size_t i = 0; i + 1 < n; ++i) {
        const double a = nodes[i], b = nodes[i + 1], h = b - a;
        min_width = std::min(min_width, h);
        d->areas[i] += 2 * std::numbers::pi * h * (2 * a + b) / 6;
        d->areas[i + 1] += 2 * std::numbers::pi * h * (a + 2 * b) / 6;
    }
    // bucket table: each bucket narrower than half the smallest cell
    const double span = nodes.back() - nodes.front();
    const double want = 2 * span / min_width;
    const std::size_t buckets = static_cast<std::size_t>(std::clamp(want, 16.0, double(1 << 22)));
    d->bucket_inv = buckets / span;
    d->bucket_cell.resize(buckets + 1);
    std::size_t cell = 0;
    for(std::size_t k = 0; k <= buckets; ++k) {
        const double rk = nodes.front() + k / d->bucket_inv;
        while(cell + 2 < n && nodes[cell + 1] <= rk) ++cell;
        d->bucket_cell[k] = static_cast<std::uint32_t>(cell);
    }
    d->nodes = std::move(nodes);
    d_ = std::move(d);
}

RadialGrid RadialGrid::uniform(std::size_t n, double r_max)
{
    if(!(r_max > 0)) throw InputError("RadialGrid::uniform: r_max must be positive");
    if(n < min_nodes) throw InputError("RadialGrid: need at least 16 nodes");
    std::vector<double> nodes(n);
    for(std::size_t i = 0; i < n; ++i) nodes[i] = r_max * double(i) / double(n - 1);
    nodes.back() = r_max;
    return RadialGrid(std::move(nodes), Spacing::Uniform, 0);
}

RadialGrid RadialGrid::logarithmic(std::size_t n, double r_min, double r_max)
{
    if(!(r_min > 0 && r_max > r_min)) throw InputError("RadialGrid::logarithmic: need 0 < r_min < r_max");
    if(n < min_nodes) throw InputError("RadialGrid: need at least 16 nodes");
    std::vector<double> nodes(n);
    nodes[0] = 0;
    const double lo = std::log(r_min), hi = std::log(r_max);
    for(std::size_t i = 1; i < n; ++i) nodes[i] = std::exp(lo + (hi - lo) * double(i - 1) / double(n - 2));
    nodes.back() = r_max;
    return RadialGrid(std::move(nodes), Spacing::Log, 0);
}

RadialGrid RadialGrid::hybrid(std::size_t n, double r_core, double r_max)
{
    if(!(r_core > 0 && r_max > 0)) throw InputError("RadialGrid::hybrid: r_core and r_max must be positive");
    if(n < min_nodes) throw InputError("RadialGrid: need at least 16 nodes");
    std::vector<double> nodes(n);
    const double umax = std::asinh(r_max / r_core);
    for(std::size_t i = 0; i < n; ++i) nodes[i] = r_core * std::sinh(umax * double(i) / double(n - 1));
    nodes[0] = 0;
    nodes.back() = r_max;
    return RadialGrid(std::move(nodes), Spacing::Hybrid, r_core);
}

RadialGrid RadialGrid::from_nodes(std::vector<double> nodes)
{
    return RadialGrid(std::move(nodes), Spacing::Explicit, 0);
}

std::size_t RadialGrid::locate(double r) const
{
    const auto& nd = d_->nodes;
    if(!(r >= nd.front()) || !(r < nd.back())) return npos;
    const std::size_t k = static_cast<std::size_t>((r - nd.front()) * d_->bucket_inv);
    std::size_t cell = d_->bucket_cell[std::min(k, d_->bucket_cell.size() - 1)];
    while(cell + 2 < nd.size() && nd[cell + 1] <= r) ++cell;
    while(cell > 0 && nd[cell] > r) --cell;
    return cell;
}

RadialGrid RadialGrid::scaled(double factor) const
{
    if(!(factor > 0)) throw InputError("RadialGrid::scaled: factor must be positive");
    std::vector<double> nodes(d_->nodes.begin(), d_->nodes.end());
    for(double& x : nodes) x *= factor;
    return RadialGrid(std::move(nodes), d_->spacing, d_->r_core * factor);
}

std::string RadialGrid::hash() const
{
    std::uint64_t h = 1469598103934665603ULL;
    for(double x : d_->nodes) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &x, sizeof x);
        for(unsigned char b : bytes) {
            h ^= b;
            h *= 1099511628211ULL;
        }
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------

RadialProfile::RadialProfile(RadialGrid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v))
{
    if(values.size() != grid.size()) throw InputError("RadialProfile: value count does not match grid");
    for(double x : values)
        if(!std::isfinite(x)) throw InputError("RadialProfile: non-finite value");
}

RadialProfile::RadialProfile(RadialGrid g) : grid(std::move(g)), values(grid.size(), 0.0) {}

double RadialProfile::at(double r) const
{
    if(r <= grid.r(0)) return values.front();
    const std::size_t i = grid.locate(r);
    if(i == RadialGrid::npos) return r == grid.r_max() ? values.back() : 0.0;
    const double t = (r - grid.r(i)) / (grid.r(i + 1) - grid.r(i));
    return (1 - t) * values[i] + t * values[i + 1];
}

double RadialProfile::integral() const
{
    double s = 0;
    const auto A = grid.areas();
    for(std::size_t i = 0; i < values.size(); ++i) s += A[i] * values[i];
    return s;
}

void write_profile_csv(std::ostream& os, const RadialProfile& p, const std::vector<std::string>& comments)
{
    for(const auto& c : comments) os << "# " << c << '\n';
    os << "r,value\n";
    for(std::size_t i = 0; i < p.size(); ++i) os << format_double(p.grid.r(i)) << ',' << format_double(p.values[i]) << '\n';
}

RadialProfile read_profile_csv(std::istream& is)
{
    std::vector<double> r, v;
    std::string line;
    bool header_seen = false;
    std::size_t lineno = 0;
    while(std::getline(is, line)) {
        ++lineno;
        if(line.empty() || line[0] == '#') continue;
        if(!header_seen) {
            header_seen = true;
            if(line.find_first_of("0123456789") != 0 && line[0] != '-' && line[0] != '.') continue;
        }
        std::istringstream ls(line);
        std::string a, b;
        if(!std::getline(ls, a, ',') || !std::getline(ls, b, ','))
            throw InputError("profile CSV: expected two columns at line " + std::to_string(lineno));
        try {
            r.push_back(std::stod(a));
            v.push_back(std::stod(b));
        } catch(const std::exception&) {
            throw InputError("profile CSV: unparsable number at line " + std::to_string(lineno));
        }
    }
    return RadialProfile(RadialGrid::from_nodes(std::move(r)), std::move(v));
}

}  // namespace flatvp
