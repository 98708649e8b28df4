// flatvp command-line driver. Exit codes: 0 success, 1 numerical or check
// failure, 2 usage or config error.
#include "config.hpp"

#include "flatvp/casimir.hpp"
#include "flatvp/errors.hpp"
#include "flatvp/flat_potential.hpp"
#include "flatvp/functionals.hpp"
#include "flatvp/parallel.hpp"
#include "flatvp/radial.hpp"
#include "flatvp/rng.hpp"
#include "flatvp/stability_sim.hpp"
#include "flatvp/steady_state.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace flatvp;
using flatvp::cli::Config;
using flatvp::cli::ConfigError;

namespace {

/// Artifact that no longer matches what it claims to be (exit code 1).
class StaleArtifact : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Context {
    Config cfg;
    fs::path out;
    std::uint64_t seed = 1;
    std::string config_hash;
};

std::vector<std::string> meta_lines(const Context& ctx, const std::string& grid_hash)
{
    return {"tool_version = " FLATVP_VERSION, "config_hash = " + ctx.config_hash, "seed = " + std::to_string(ctx.seed),
            "grid_hash = " + grid_hash};
}

json meta_json(const Context& ctx, const std::string& grid_hash)
{
    json j;
    j["tool_version"] = FLATVP_VERSION;
    j["config_hash"] = ctx.config_hash;
    j["seed"] = ctx.seed;
    j["grid_hash"] = grid_hash;
    return j;
}

std::ofstream open_out(const Context& ctx, const std::string& name)
{
    fs::create_directories(ctx.out);
    std::ofstream os(ctx.out / name);
    if(!os) throw ConfigError("cannot write " + (ctx.out / name).string());
    return os;
}

void write_json(const Context& ctx, const std::string& name, const json& j)
{
    auto os = open_out(ctx, name);
    os << j.dump(2) << '\n';
}

json to_json(const FunctionalReport& r)
{
    json j;
    j["mass"] = r.mass;
    j["e_kin"] = r.e_kin;
    j["e_pot"] = r.e_pot;
    j["casimir"] = r.casimir;
    j["p"] = r.p;
    j["d"] = r.d;
    j["method"] = r.method;
    json checks = json::array();
    for(const auto& c : r.checks) checks.push_back(json{{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"pass", c.pass}});
    j["checks"] = checks;
    return j;
}

json check_json(const std::string& name, double lhs, double rhs, bool pass)
{
    return json{{"name", name}, {"lhs", lhs}, {"rhs", rhs}, {"pass", pass}};
}

bool all_checks_pass(const json& checks)
{
    for(const auto& c : checks)
        if(!c["pass"].get<bool>()) return false;
    return true;
}

void print_checks(const json& checks)
{
    for(const auto& c : checks)
        std::cout << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << "  lhs "
                  << format_double(c["lhs"].get<double>()) << "  rhs " << format_double(c["rhs"].get<double>()) << '\n';
}

// ---------------------------------------------------------------------------
// model and solver sections

TabulatedCasimir read_table(const fs::path& path)
{
    std::ifstream in(path);
    if(!in) throw ConfigError("cannot open Casimir table " + path.string());
    std::vector<double> f, Q;
    std::string line;
    int no = 0;
    while(std::getline(in, line)) {
        ++no;
        if(line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string a, b;
        if(!std::getline(ls, a, ',') || !std::getline(ls, b, ',')) throw ConfigError(path.string() + ":" + std::to_string(no) + ": expected f,Q");
        char* end = nullptr;
        const double x = std::strtod(a.c_str(), &end);
        if(end == a.c_str()) {
            if(f.empty()) continue;   // header
            throw ConfigError(path.string() + ":" + std::to_string(no) + ": expected numbers");
        }
        const double y = std::strtod(b.c_str(), &end);
        if(end == b.c_str()) throw ConfigError(path.string() + ":" + std::to_string(no) + ": expected numbers");
        f.push_back(x);
        Q.push_back(y);
    }
    try {
        return TabulatedCasimir(std::move(f), std::move(Q));
    } catch(const InputError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

CasimirModel read_model(const Config& cfg)
{
    cfg.require_known("model", {"kind", "mu", "c", "mu1", "mu2", "mu3", "C1", "C2", "C3", "C4", "F0", "table"});
    const std::string kind = cfg.str("model", "kind", "polytrope");
    try {
        if(kind == "polytrope") return CasimirModel::polytrope(cfg.num("model", "mu"), cfg.num("model", "c", 1.0));
        if(kind == "double_power")
            return CasimirModel::double_power(cfg.num("model", "mu1"), cfg.num("model", "mu2"), cfg.num("model", "C1"),
                                              cfg.num("model", "C2"), cfg.num("model", "F0", 1.0));
        if(kind == "custom") {
            AssumptionConstants d;
            d.mu1 = cfg.num("model", "mu1", d.mu1);
            d.mu2 = cfg.num("model", "mu2", d.mu2);
            d.mu3 = cfg.num("model", "mu3", d.mu3);
            d.C1 = cfg.num("model", "C1", d.C1);
            d.C2 = cfg.num("model", "C2", d.C2);
            d.C3 = cfg.num("model", "C3", d.C3);
            d.C4 = cfg.num("model", "C4", d.C4);
            d.F0 = cfg.num("model", "F0", d.F0);
            return CasimirModel::custom(read_table(cfg.path("model", "table")), d);
        }
    } catch(const InputError& e) {
        throw ConfigError(std::string("[model] ") + e.what());
    }
    cfg.fail("model", "kind", "expected polytrope, double_power or custom, got '" + kind + "'");
}

Spacing read_spacing(const Config& cfg)
{
    const std::string s = cfg.str("solver", "spacing", "hybrid");
    if(s == "hybrid") return Spacing::Hybrid;
    if(s == "uniform") return Spacing::Uniform;
    if(s == "log") return Spacing::Log;
    cfg.fail("solver", "spacing", "expected hybrid, uniform or log, got '" + s + "'");
}

SolverOptions read_solver(const Config& cfg)
{
    cfg.require_known("solver", {"mass", "damping", "max_iters", "residual_tol", "mass_tol", "E_lo", "E_hi",
                                 "divergence_window", "n", "spacing", "r_max", "core_fraction", "support_factor"});
    SolverOptions o;
    o.damping = cfg.num("solver", "damping", o.damping);
    o.max_iters = static_cast<int>(cfg.count("solver", "max_iters", static_cast<std::uint64_t>(o.max_iters)));
    o.residual_tol = cfg.num("solver", "residual_tol", o.residual_tol);
    o.mass_tol = cfg.num("solver", "mass_tol", o.mass_tol);
    o.E_lo = cfg.num("solver", "E_lo", o.E_lo);
    o.E_hi = cfg.num("solver", "E_hi", o.E_hi);
    o.divergence_window = static_cast<int>(cfg.count("solver", "divergence_window", 10));
    o.grid.n = cfg.count("solver", "n", o.grid.n);
    o.grid.spacing = read_spacing(cfg);
    o.grid.r_max = cfg.num("solver", "r_max", o.grid.r_max);
    o.grid.core_fraction = cfg.num("solver", "core_fraction", o.grid.core_fraction);
    o.grid.support_factor = cfg.num("solver", "support_factor", o.grid.support_factor);
    try {
        o.validate();
    } catch(const InputError& e) {
        throw ConfigError(std::string("[solver] ") + e.what());
    }
    return o;
}

double read_mass(const Config& cfg, const std::string& section, const std::string& key)
{
    const double M = cfg.num(section, key);
    if(!(M > 0)) cfg.fail(section, key, "mass must be positive");
    return M;
}

SteadyState run_solve(const CasimirModel& model, double M, const SolverOptions& opts)
{
    try {
        return solve(model, M, opts);
    } catch(const InputError& e) {
        throw ConfigError(e.what());
    }
}

// ---------------------------------------------------------------------------
// steady-state artifacts

void write_state_csv(const Context& ctx, const SteadyState& ss, const std::string& name)
{
    auto os = open_out(ctx, name);
    for(const auto& m : meta_lines(ctx, ss.grid().hash())) os << "# " << m << '\n';
    os << "# model = " << ss.model().describe() << '\n';
    os << "# E0 = " << format_double(ss.E0) << '\n';
    os << "# mass = " << format_double(ss.mass) << '\n';
    os << "r,rho,U\n";
    for(std::size_t i = 0; i < ss.grid().size(); ++i)
        os << format_double(ss.grid().r(i)) << ',' << format_double(ss.rho0.values[i]) << ','
           << format_double(ss.U0.values[i]) << '\n';
}

SteadyState read_state_csv(const fs::path& path, const CasimirModel& model)
{
    std::ifstream in(path);
    if(!in) throw ConfigError("cannot open steady-state artifact " + path.string());
    std::map<std::string, std::string> meta;
    std::vector<double> r, rho;
    std::string line;
    bool header = false;
    int no = 0;
    while(std::getline(in, line)) {
        ++no;
        if(line.empty()) continue;
        if(line[0] == '#') {
            const auto eq = line.find(" = ");
            if(eq != std::string::npos) meta[line.substr(2, eq - 2)] = line.substr(eq + 3);
            continue;
        }
        if(!header) {
            if(line != "r,rho,U") throw StaleArtifact(path.string() + ": not a steady-state artifact (header '" + line + "')");
            header = true;
            continue;
        }
        std::istringstream ls(line);
        std::string a, b;
        std::getline(ls, a, ',');
        std::getline(ls, b, ',');
        char* e1 = nullptr;
        char* e2 = nullptr;
        const double x = std::strtod(a.c_str(), &e1), y = std::strtod(b.c_str(), &e2);
        if(e1 == a.c_str() || e2 == b.c_str())
            throw StaleArtifact(path.string() + ":" + std::to_string(no) + ": malformed row");
        r.push_back(x);
        rho.push_back(y);
    }
    for(const char* k : {"grid_hash", "model", "E0"})
        if(!meta.count(k)) throw StaleArtifact(path.string() + ": missing '" + k + "' metadata");
    const RadialGrid g = RadialGrid::from_nodes(std::move(r));
    if(g.hash() != meta["grid_hash"])
        throw StaleArtifact(path.string() + ": grid hash " + g.hash() + " does not match recorded " + meta["grid_hash"]);
    if(meta["model"] != model.describe())
        throw StaleArtifact(path.string() + ": artifact model '" + meta["model"] + "' differs from the configured model '" +
                            model.describe() + "'");
    return restore_state(model, RadialProfile(g, std::move(rho)), std::stod(meta["E0"]));
}

/// The state named by `[section] state`, or a fresh solve from [solver].
SteadyState obtain_state(const Context& ctx, const CasimirModel& model, const std::string& section)
{
    if(ctx.cfg.has(section, "state")) return read_state_csv(ctx.cfg.path(section, "state"), model);
    const SolverOptions opts = read_solver(ctx.cfg);
    return run_solve(model, read_mass(ctx.cfg, "solver", "mass"), opts);
}

json regularity_json(const RegularityReport& g)
{
    json j;
    j["max_abs_U"] = g.max_abs_U;
    j["max_rho"] = g.max_rho;
    j["gradient_lipschitz"] = g.gradient_lipschitz;
    j["gradient_max_jump"] = g.gradient_max_jump;
    j["identity_defect"] = g.identity_defect;
    j["identity_defect_edge"] = g.identity_defect_edge;
    j["edge_exponent"] = g.edge_exponent;
    j["edge_exponent_radial"] = g.edge_exponent_radial;
    j["edge_density"] = g.edge_density;
    j["bounded"] = g.bounded;
    return j;
}

// ---------------------------------------------------------------------------
// commands

int cmd_validate(const Context& ctx)
{
    const CasimirModel model = read_model(ctx.cfg);
    const ValidationReport rep = validate_assumptions(model, default_f_grid(model.declared().F0));
    json j = meta_json(ctx, "none");
    j["model"] = model.describe();
    json checks = json::array();
    for(const auto& c : rep.checks) {
        checks.push_back(json{{"name", c.name}, {"pass", c.pass}, {"worst", c.worst}, {"detail", c.detail}});
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << "  " << c.detail << '\n';
    }
    j["checks"] = checks;
    j["pass"] = rep.all_pass();
    write_json(ctx, "validate.json", j);
    return rep.all_pass() ? 0 : 1;
}

int cmd_solve(const Context& ctx)
{
    const CasimirModel model = read_model(ctx.cfg);
    const SolverOptions opts = read_solver(ctx.cfg);
    const double M = read_mass(ctx.cfg, "solver", "mass");
    SteadyState ss = [&]() {
        try {
            return run_solve(model, M, opts);
        } catch(const ConvergenceError& e) {
            auto os = open_out(ctx, "residual_history.csv");
            for(const auto& m : meta_lines(ctx, "none")) os << "# " << m << '\n';
            os << "iteration,residual\n";
            for(std::size_t i = 0; i < e.history.size(); ++i) os << i + 1 << ',' << format_double(e.history[i]) << '\n';
            throw ConvergenceError(std::string(e.what()) + "; residual history in " +
                                   (ctx.out / "residual_history.csv").string());
        }
    }();
    write_state_csv(ctx, ss, "steady_state.csv");
    const FunctionalReport fr = evaluate_steady(ss);
    json j = meta_json(ctx, ss.grid().hash());
    j["model"] = model.describe();
    j["state"] = "steady_state.csv";
    j["E0"] = ss.E0;
    j["mass"] = ss.mass;
    j["support_radius"] = ss.support_radius;
    j["support_edge"] = ss.support_edge;
    j["residual"] = ss.residual;
    j["iterations"] = ss.iterations;
    j["grid"] = json{{"n", ss.grid().size()}, {"spacing", to_string(opts.grid.spacing)}, {"r_max", ss.grid().r_max()}};
    j["functionals"] = to_json(fr);
    j["regularity"] = regularity_json(regularity_report(ss));
    write_json(ctx, "steady_state.json", j);
    std::cout << "converged in " << ss.iterations << " sweeps: E0 " << format_double(ss.E0) << ", D "
              << format_double(fr.d) << ", support " << format_double(ss.support_radius) << '\n';
    print_checks(j["functionals"]["checks"]);
    return 0;
}

int cmd_scaling(const Context& ctx)
{
    const Config& cfg = ctx.cfg;
    cfg.require_known("scaling", {"M1", "M2", "tolerance", "identity_samples"});
    const CasimirModel model = read_model(cfg);
    const SolverOptions opts = read_solver(cfg);
    const double M1 = read_mass(cfg, "scaling", "M1"), M2 = read_mass(cfg, "scaling", "M2");
    if(M1 > M2) cfg.fail("scaling", "M1", "need M1 <= M2");
    const double tol = cfg.num("scaling", "tolerance", 1e-8);
    const auto samples = cfg.count("scaling", "identity_samples", 20);

    const auto family = assemble_unit_family(opts.grid);
    const SteadyState s2 = solve(model, M2, opts, family);
    const SteadyState s1 = M1 == M2 ? s2 : solve(model, M1, opts, family);
    const ScalingInequalityReport r = scaling_inequality_check(s1, s2, tol);

    json j = meta_json(ctx, family->grid().hash());
    j["model"] = model.describe();
    for(auto [k, v] : {std::pair{"M1", r.M1}, {"M2", r.M2}, {"m", r.m}, {"alpha", r.alpha}, {"D1", r.D1}, {"D2", r.D2},
                       {"rhs", r.rhs}, {"margin", r.margin}, {"rescaled_mass", r.rescaled_mass},
                       {"rescaled_d", r.rescaled_d}, {"mechanism_margin", r.mechanism_margin},
                       {"support1", r.support1}, {"support2", r.support2}})
        j[k] = v;
    j["triple"] = json{{"a", r.triple.a}, {"b", r.triple.b}, {"c", r.triple.c}};
    json checks = json::array();
    checks.push_back(check_json("scaling_inequality", r.D1, r.rhs, r.holds));
    checks.push_back(check_json("rescaled_mechanism", r.rescaled_d, r.rhs, r.mechanism_holds));
    double worst = 0;
    for(std::uint64_t k = 0; k < samples; ++k) {
        CounterRng rng(ctx.seed, k);
        ScalingParams p;
        p.a = 0.5 * std::pow(4.0, rng.uniform());
        p.b = 0.5 * std::pow(4.0, rng.uniform());
        p.c = 0.5 * std::pow(4.0, rng.uniform());
        const RescaleResult rr = rescale_steady(s2, p);
        for(auto [x, y] : {std::pair{rr.predicted.mass, rr.direct.mass}, {rr.predicted.e_kin, rr.direct.e_kin},
                           {rr.predicted.e_pot, rr.direct.e_pot}, {rr.predicted.casimir, rr.direct.casimir}})
            worst = std::max(worst, std::fabs(x - y) / std::fabs(y));
    }
    if(samples > 0) checks.push_back(check_json("scaling_identity", worst, 1e-6, worst <= 1e-6));
    j["checks"] = checks;
    write_json(ctx, "scaling.json", j);
    print_checks(checks);
    return all_checks_pass(checks) ? 0 : 1;
}

int cmd_split(const Context& ctx)
{
    const Config& cfg = ctx.cfg;
    cfg.require_known("split", {"state", "R", "C_M", "outer_constant"});
    const CasimirModel model = read_model(cfg);
    const SteadyState ss = obtain_state(ctx, model, "split");
    const double R = cfg.num("split", "R");
    if(!(R > 0)) cfg.fail("split", "R", "must be positive");
    const double C_M = cfg.num("split", "C_M", std::numeric_limits<double>::quiet_NaN());
    const SplitReport s = split_diagnostic(ss, R, C_M, cfg.num("split", "outer_constant", 0.0));

    json j = meta_json(ctx, ss.grid().hash());
    j["model"] = model.describe();
    for(auto [k, v] : {std::pair{"R", s.R}, {"mass", s.mass}, {"interior_mass", s.interior_mass},
                       {"exterior_mass", s.exterior_mass}, {"mixed_term", s.mixed_term}, {"norm_4_3", s.norm_4_3},
                       {"C_alpha", s.C_alpha}, {"C_M", s.C_M}, {"C_M_required", s.C_M_required},
                       {"outer_constant", s.outer_constant}, {"mixed_bound", s.mixed_bound}})
        j[k] = v;
    j["C_M_calibrated"] = std::isnan(C_M);
    json checks = json::array();
    const double partition = s.interior_mass + s.exterior_mass;
    checks.push_back(check_json("mass_partition", partition, s.mass, std::fabs(partition - s.mass) <= 1e-10 * s.mass));
    checks.push_back(check_json("split_inequality", s.lhs, s.rhs, s.holds));
    checks.push_back(check_json("mixed_term_bound", std::fabs(s.mixed_term), s.mixed_bound, s.mixed_holds));
    j["checks"] = checks;
    write_json(ctx, "split.json", j);
    std::cout << "lambda = " << format_double(s.exterior_mass) << '\n';
    print_checks(checks);
    return all_checks_pass(checks) ? 0 : 1;
}

int cmd_evolve(const Context& ctx)
{
    const Config& cfg = ctx.cfg;
    cfg.require_known("evolve", {"state", "N", "dt", "t_end", "t_end_dyn", "method", "eps_soft", "cadence", "seed",
                                 "perturbation", "delta", "force_nodes", "force_extent", "direct_cap", "snapshot",
                                 "max_D_drift", "max_L3_drift", "scott_factor", "bias_correction"});
    const CasimirModel model = read_model(cfg);
    SimConfig sc;
    sc.N = cfg.count("evolve", "N", sc.N);
    sc.dt = cfg.num("evolve", "dt", 0.0);
    sc.t_end = cfg.num("evolve", "t_end", 0.0);
    try {
        sc.method = force_method_from_string(cfg.str("evolve", "method", "grid"));
    } catch(const InputError& e) {
        cfg.fail("evolve", "method", e.what());
    }
    sc.eps_soft = cfg.num("evolve", "eps_soft", 0.0);
    sc.cadence = static_cast<int>(cfg.count("evolve", "cadence", 20));
    sc.seed = ctx.seed;
    sc.force_nodes = cfg.count("evolve", "force_nodes", sc.force_nodes);
    sc.force_extent = cfg.num("evolve", "force_extent", sc.force_extent);
    sc.direct_cap = cfg.count("evolve", "direct_cap", sc.direct_cap);
    sc.histogram.scott_factor = cfg.num("evolve", "scott_factor", sc.histogram.scott_factor);
    sc.histogram.bias_correction = cfg.flag("evolve", "bias_correction", true);
    Perturbation pert;
    try {
        pert.kind = perturbation_kind_from_string(cfg.str("evolve", "perturbation", "none"));
    } catch(const InputError& e) {
        cfg.fail("evolve", "perturbation", e.what());
    }
    pert.delta = cfg.num("evolve", "delta", 0.0);
    try {
        sc.validate();
    } catch(const InputError& e) {
        throw ConfigError(std::string("[evolve] ") + e.what());
    }
    const double max_D = cfg.num("evolve", "max_D_drift", 0.01);
    const double max_L3 = cfg.num("evolve", "max_L3_drift", 1e-6);

    const SteadyState ss = obtain_state(ctx, model, "evolve");
    if(cfg.has("evolve", "t_end_dyn")) sc.t_end = cfg.num("evolve", "t_end_dyn") * dynamical_time(ss);
    const SimConfig resolved = sc.resolve(ss);

    auto ts = open_out(ctx, "timeseries.csv");
    for(const auto& m : meta_lines(ctx, ss.grid().hash())) ts << "# " << m << '\n';
    ts << "# N = " << resolved.N << "\n# dt = " << format_double(resolved.dt) << "\n# method = " << to_string(resolved.method)
       << "\n# perturbation = " << to_string(pert.kind) << ' ' << format_double(pert.delta) << "\n# rng = "
       << CounterRng::name << '\n';
    write_timeseries_header(ts);
    const RunSummary rs = run(ss, sc, pert, [&](const TimeSeriesRow& row) { write_timeseries_row(ts, row); });
    ts.close();

    if(cfg.flag("evolve", "snapshot", false)) {
        auto os = open_out(ctx, "snapshot.csv");
        std::vector<std::string> meta = meta_lines(ctx, ss.grid().hash());
        meta.push_back("N = " + std::to_string(resolved.N));
        meta.push_back("dt = " + format_double(resolved.dt));
        meta.push_back("method = " + to_string(resolved.method));
        meta.push_back("t = " + format_double(rs.final_state.time));
        write_snapshot_csv(os, rs.final_state, meta);
    }

    json j = meta_json(ctx, ss.grid().hash());
    j["model"] = model.describe();
    j["N"] = resolved.N;
    j["dt"] = resolved.dt;
    j["t_end"] = resolved.t_end;
    j["t_dyn"] = rs.t_dyn;
    j["method"] = to_string(resolved.method);
    j["eps_soft"] = resolved.eps_soft;
    j["perturbation"] = json{{"kind", to_string(pert.kind)}, {"delta", pert.delta}};
    j["D_drift"] = rs.D_drift;
    j["L3_drift"] = rs.L3_drift;
    j["energy_drift"] = rs.energy_drift;
    j["noise_floor"] = rs.noise_floor;
    j["escaped"] = rs.escaped;
    json checks = json::array();
    checks.push_back(check_json("D_drift", rs.D_drift, max_D, rs.D_drift <= max_D));
    checks.push_back(check_json("L3_drift", rs.L3_drift, max_L3, rs.L3_drift <= max_L3));
    double worst_neg = 0;
    for(const auto& row : rs.rows) worst_neg = std::min(worst_neg, row.d_dist + row.eps_mc);
    checks.push_back(check_json("d_above_mc_tolerance", worst_neg, 0.0, rs.d_nonnegative));
    if(pert.kind == Perturbation::Kind::None) {
        double worst = 0;
        for(const auto& row : rs.rows) worst = std::max(worst, std::fabs(row.d_dist));
        checks.push_back(check_json("d_within_noise_floor", worst, 3 * rs.noise_floor, rs.d_within_floor));
    }
    j["checks"] = checks;
    write_json(ctx, "evolve.json", j);
    print_checks(checks);
    return all_checks_pass(checks) ? 0 : 1;
}

int cmd_potential_table(const Context& ctx)
{
    const Config& cfg = ctx.cfg;
    cfg.require_known("potential-table", {"input", "output"});
    const fs::path in_path = cfg.path("potential-table", "input");
    std::ifstream in(in_path);
    if(!in) throw ConfigError("cannot open density table " + in_path.string());
    RadialProfile rho = [&]() {
        try {
            return read_profile_csv(in);
        } catch(const InputError& e) {
            throw ConfigError(in_path.string() + ": " + e.what());
        }
    }();
    const RadialProfile U = potential_from_density(rho);
    auto os = open_out(ctx, cfg.str("potential-table", "output", "potential.csv"));
    write_profile_csv(os, U, meta_lines(ctx, rho.grid.hash()));
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Flat Vlasov-Poisson steady states, scaling and stability diagnostics"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    std::string out_dir = ".";
    unsigned threads = 0;
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "INI configuration file")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker thread cap");
    auto* seed_opt = app.add_option("--seed", seed, "RNG seed (overrides [evolve] seed)");
    const std::map<std::string, int (*)(const Context&)> commands = {
        {"validate", cmd_validate}, {"solve", cmd_solve},   {"scaling", cmd_scaling},
        {"split", cmd_split},       {"evolve", cmd_evolve}, {"potential-table", cmd_potential_table}};
    const std::map<std::string, std::string> help = {
        {"validate", "check the Casimir assumptions of [model]"},
        {"solve", "solve the steady state of [solver] mass"},
        {"scaling", "compare D at two masses and check the rescaling identities"},
        {"split", "split a steady state at radius R"},
        {"evolve", "sample the steady state and evolve the particles"},
        {"potential-table", "map a density CSV to its potential CSV"}};
    for(const auto& [name, fn] : commands) app.add_subcommand(name, help.at(name));

    try {
        app.parse(argc, argv);
    } catch(const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        Context ctx{Config::load(config_path), out_dir, 1, ""};
        ctx.config_hash = ctx.cfg.hash();
        ctx.seed = *seed_opt ? seed : ctx.cfg.count("evolve", "seed", 1);
        if(*app.get_option("--threads")) {
            if(threads < 1) throw ConfigError("--threads must be at least 1");
            set_num_threads(threads);
        }
        for(const auto* sub : app.get_subcommands()) return commands.at(sub->get_name())(ctx);
    } catch(const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch(const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch(const StaleArtifact& e) {
        std::cerr << "stale artifact: " << e.what() << '\n';
        return 1;
    } catch(const NonFiniteError& e) {
        std::cerr << "error: " << e.what() << " (particle " << e.index << ")\n";
        return 1;
    } catch(const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
