#pragma once

/// Named experiments. Each recipe writes CSV artifacts and report.txt into
/// the configured output directory and returns its checks.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nmart/config.hpp"
#include "nmart/controlled.hpp"
#include "nmart/csv.hpp"
#include "nmart/errors.hpp"
#include "nmart/hjb.hpp"
#include "nmart/levy.hpp"
#include "nmart/martingale.hpp"
#include "nmart/operators.hpp"
#include "nmart/problem.hpp"
#include "nmart/rng.hpp"
#include "nmart/stats.hpp"

namespace nmart {

struct Check {
    std::string name;
    double value = 0.0;
    std::string tolerance; ///< the acceptance condition, human readable
    bool pass = false;
    double wall_seconds = 0.0;
};

struct RunReport {
    std::string recipe;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> defaults;
    std::vector<Check> checks;
    std::vector<std::string> notes;
    std::vector<std::string> artifacts;

    bool passed() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return !checks.empty();
    }
};

inline std::string render_report(const RunReport& r) {
    std::ostringstream os;
    os << "recipe: " << r.recipe << '\n';
    os << "config hash: " << std::hex << std::setw(16) << std::setfill('0') << r.config_hash
       << std::dec << std::setfill(' ') << '\n';
    os << "seed: " << r.seed << '\n';
    os << "defaults:";
    if (r.defaults.empty()) os << " none";
    for (const auto& d : r.defaults) os << ' ' << d;
    os << "\n\n";
    for (const auto& c : r.checks) {
        os << (c.pass ? "PASS" : "FAIL") << "  " << c.name << "  value=" << format_short(c.value)
           << "  require " << c.tolerance << "  wall=" << std::fixed << std::setprecision(3)
           << c.wall_seconds << "s" << std::defaultfloat << std::setprecision(6) << '\n';
    }
    for (const auto& n : r.notes) os << "note: " << n << '\n';
    os << "\nartifacts:";
    for (const auto& a : r.artifacts) os << ' ' << a;
    os << "\nresult: " << (r.passed() ? "PASS" : "FAIL") << '\n';
    return os.str();
}

inline const std::vector<std::string>& recipe_names() {
    static const std::vector<std::string> kNames = {
        "kernel-masses", "martingale-stats", "structure-residual", "orthogonality",
        "ito-check",     "closed-form-hjb",  "mc-vs-pdde",         "dpp-check",
        "counterexample", "refine-check",    "determinism"};
    return kNames;
}

namespace detail {

/// Accumulates checks with the wall time since the previous one.
class Recorder {
public:
    Recorder(RunReport& r, std::string dir) : report_(r), dir_(std::move(dir)) {}

    bool check(std::string name, double value, bool pass, std::string tolerance) {
        const auto now = std::chrono::steady_clock::now();
        const double wall = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        report_.checks.push_back({std::move(name), value, std::move(tolerance), pass, wall});
        return pass;
    }
    bool at_most(std::string name, double value, double bound) {
        return check(std::move(name), value, value <= bound, "<= " + format_short(bound));
    }
    bool at_least(std::string name, double value, double bound) {
        return check(std::move(name), value, value >= bound, ">= " + format_short(bound));
    }
    bool inside(std::string name, double value, double lo, double hi) {
        return check(std::move(name), value, value >= lo && value <= hi,
                     "in [" + format_short(lo) + ", " + format_short(hi) + "]");
    }
    void note(std::string text) { report_.notes.push_back(std::move(text)); }
    void write(const Table& t, const std::string& file) {
        emit_csv(t, (std::filesystem::path(dir_) / file).string());
        report_.artifacts.push_back(file);
    }

private:
    RunReport& report_;
    std::string dir_;
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline LevyMeasure configured_measure(const ExperimentConfig& c) {
    if (c.measure == "user_table") {
        const Table t = read_csv(c.measure_table);
        if (t.columns.size() < 2) throw ConfigError({"measure table needs columns x, density"});
        std::vector<std::pair<double, double>> pts;
        for (const auto& row : t.rows) pts.emplace_back(row[0], row[1]);
        return levy::user_table(std::move(pts));
    }
    return levy::inverse_square_positive(c.measure_scale);
}

inline Problem closed_form(const ExperimentConfig& c, const std::string& tag = "closed_form") {
    return problems::make(tag, 1, 1, c.params, c.t0, c.T);
}

inline Grids grids_for(const ExperimentConfig& c, const Problem& p, const ControlGrid& controls,
                       double dy) {
    DomainConfig dc;
    dc.m = p.coeffs.m;
    dc.lo = {c.y_min, c.y_min};
    dc.hi = {c.y_max, c.y_max};
    dc.spacing = {dy, dy};
    dc.t0 = c.t0;
    dc.T = c.T;
    dc.d = p.coeffs.d;
    dc.delta0 = c.delta0;
    const auto space = SpatialGrid::uniform(dc.m, dc.lo, dc.hi, dc.spacing);
    const auto [s, b] = coefficient_bounds(p.coeffs, controls, space);
    dc.sigma_max = s;
    dc.b_max = b;
    return build_grids(dc);
}

inline ValueField solve_problem(const ExperimentConfig& c, const Problem& p,
                                const ControlGrid& controls, double dy) {
    SolveOptions opts;
    opts.problem_tag = p.tag;
    return solve(p.coeffs, p.cost, grids_for(c, p, controls, dy), controls, opts);
}

inline Window radius_window(double r) {
    Window w;
    w.lo = {-r, -r};
    w.hi = {r, r};
    return w;
}

inline double closed_form_value(const ExperimentConfig& c, double t, const Vec& y) {
    const double s = c.params.count("sigma") ? c.params.at("sigma") : 1.0;
    return y.squaredNorm() + s * s * (c.T - t);
}

// ---------------------------------------------------------------- recipes

inline void kernel_masses(const ExperimentConfig& c, Recorder& rec) {
    const LevyMeasure nu = configured_measure(c);
    const MeasureReport admiss = validate_measure(nu);
    rec.check("measure integrability", admiss.integrable ? 1.0 : 0.0, admiss.integrable, "== 1");
    rec.check("measure divergence near zero", admiss.divergent_near_zero ? 1.0 : 0.0,
              admiss.divergent_near_zero, "== 1");
    const JumpRegions jr = jump_regions(nu, c.kernel_u);
    Table t;
    t.columns = {"i", "u", "tau_outer", "tau_inner", "mass", "expected"};
    for (std::size_t i = 0; i < c.kernel_u.size(); ++i) {
        const double u = c.kernel_u[i];
        const double expected = u == 0.0 ? 0.0 : 1.0 / (u * u);
        t.add_row({double(i + 1), u, jr.thresholds[i], jr.thresholds[i + 1], jr.masses[i], expected});
        rec.at_most("|mass A" + std::to_string(i + 1) + " - 1/u^2|",
                    std::abs(jr.masses[i] - expected), 1e-8);
    }
    const bool disjoint = pairwise_disjoint(jr);
    rec.check("pairwise disjoint regions", disjoint ? 1.0 : 0.0, disjoint, "== 1");
    rec.write(t, "kernel-masses.csv");
}

inline void martingale_stats(const ExperimentConfig& c, Recorder& rec) {
    const TimeGrid grid = TimeGrid::with_step(c.t0, c.T, c.dt);
    const ControlBounds bounds = c.bounds();
    const double u_jump = 0.5;
    struct Named {
        std::string name;
        ControlRule rule;
    };
    const std::vector<Named> rules = {
        {"u=0", ControlRule::constant({0.0}, bounds)},
        {"u=0.5", ControlRule::constant({u_jump}, bounds)},
        {"u=0.5*1{X<0}", ControlRule::feedback(1, bounds,
                                                [u_jump](double, std::span<const double> x,
                                                         std::span<double> u) {
                                                    u[0] = x[0] < 0.0 ? u_jump : 0.0;
                                                })},
    };
    Table t;
    t.columns = {"rule", "mean_x", "se_x", "mean_x2_minus_t", "se_x2", "jump_mismatches",
                 "decomposition_violations"};
    for (std::size_t r = 0; r < rules.size(); ++r) {
        RunningStats x;
        RunningStats x2;
        std::size_t mismatches = 0;
        std::size_t decomposition = 0;
        const std::uint64_t seed = child_seed(c.seed, r);
        for (std::size_t p = 0; p < c.paths; ++p) {
            const MartingalePath path = simulate_path(rules[r].rule, grid, seed, p);
            const double xt = path.x(path.steps(), 0);
            x.push(xt);
            x2.push(xt * xt - (c.T - c.t0));
            for (std::size_t k = 0; k < path.steps(); ++k) {
                const double u = path.u(k, 0);
                const double dx = path.increment(k, 0);
                if (path.jumped(k, 0) && path.jump_size(k, 0) != u) ++mismatches;
                if (u != 0.0) {
                    // Pure-jump step: the increment is an exact lattice value.
                    const double expected = static_cast<double>(path.jumps(k, 0)) * u - grid.dt() / u;
                    if (std::abs(dx - expected) > 1e-12 * (1.0 + std::abs(expected))) ++decomposition;
                } else if (path.jumped(k, 0)) {
                    ++decomposition;
                }
            }
        }
        const Estimate ex = Estimate::from(x);
        const Estimate eq = Estimate::from(x2);
        t.add_row({double(r), ex.mean, ex.std_error, eq.mean, eq.std_error, double(mismatches),
                   double(decomposition)});
        const std::string n = rules[r].name;
        rec.at_most(n + " |mean X_T| / se", std::abs(ex.mean) / ex.std_error, 3.0);
        rec.at_most(n + " |mean X_T^2 - T| / se", std::abs(eq.mean) / eq.std_error, 3.0);
        rec.at_most(n + " jump sizes differing from u", double(mismatches), 0.0);
        rec.at_most(n + " decomposition violations", double(decomposition), 0.0);
    }
    rec.note("rules: 0 = u=0, 1 = u=0.5, 2 = u=0.5*1{X<0}; " + std::to_string(c.paths) +
             " paths, dt = " + format_short(grid.dt()));
    rec.write(t, "martingale-stats.csv");
    rec.write(path_table(simulate_path(rules[2].rule, grid, c.seed, 0)), "martingale-path.csv");
}

inline void structure_residual_recipe(const ExperimentConfig& c, Recorder& rec) {
    const ControlBounds bounds = c.bounds();
    Table t;
    t.columns = {"u", "dt", "paths", "statistic"};
    // Mean sup-residual under the pure-jump control.
    double jump_stat[2] = {0.0, 0.0};
    for (int level = 0; level < 2; ++level) {
        const double dt = c.jump_dt / (level ? 2.0 : 1.0);
        const TimeGrid grid = TimeGrid::with_step(c.t0, c.T, dt);
        const ControlRule rule = ControlRule::constant({c.jump_u}, bounds);
        RunningStats s;
        for (std::size_t p = 0; p < c.residual_paths; ++p)
            s.push(structure_residual(simulate_path(rule, grid, child_seed(c.seed, 10 + level), p))[0]);
        jump_stat[level] = s.mean();
        t.add_row({c.jump_u, grid.dt(), double(c.residual_paths), s.mean()});
    }
    // RMS of the sup-residual under Brownian control.
    double rms[2] = {0.0, 0.0};
    for (int level = 0; level < 2; ++level) {
        const double dt = c.rms_dt / (level ? 2.0 : 1.0);
        const TimeGrid grid = TimeGrid::with_step(c.t0, c.T, dt);
        const ControlRule rule = ControlRule::constant({0.0}, bounds);
        RunningStats s;
        for (std::size_t p = 0; p < c.rms_paths; ++p) {
            const double r = structure_residual(simulate_path(rule, grid, child_seed(c.seed, 20 + level), p))[0];
            s.push(r * r);
        }
        rms[level] = std::sqrt(s.mean());
        t.add_row({0.0, grid.dt(), double(c.rms_paths), rms[level]});
    }
    rec.inside("u=" + format_short(c.jump_u) + " mean residual ratio dt/(dt/2)",
               jump_stat[0] / jump_stat[1], 1.5, 2.5);
    rec.inside("u=0 RMS residual ratio dt/(dt/2)", rms[0] / rms[1], 1.2, 1.7);
    MartingalePath empty;
    empty.d = 1;
    empty.times = {c.t0};
    empty.values = {0.0};
    rec.at_most("zero-length path residual", structure_residual(empty)[0], 0.0);
    rec.write(t, "structure-residual.csv");
}

inline void orthogonality(const ExperimentConfig& c, Recorder& rec) {
    const TimeGrid grid = TimeGrid::with_step(c.t0, c.T, c.dt);
    const ControlBounds bounds = c.bounds();
    Table t;
    t.columns = {"u", "mean_cross", "se_cross", "simultaneous_jump_rate"};
    for (double u : {1.0, 0.0}) {
        const ControlRule rule = ControlRule::constant({u, u}, bounds);
        RunningStats cross;
        std::size_t both = 0;
        const std::uint64_t seed = child_seed(c.seed, u == 0.0 ? 31 : 30);
        for (std::size_t p = 0; p < c.paths; ++p) {
            const MartingalePath path = simulate_path(rule, grid, seed, p);
            cross.push(cross_variation(path, 0, 1).back());
            for (std::size_t k = 0; k < path.steps(); ++k) both += path.jumped(k, 0) && path.jumped(k, 1);
        }
        const Estimate e = Estimate::from(cross);
        const double rate = double(both) / (double(c.paths) * double(grid.n_steps));
        t.add_row({u, e.mean, e.std_error, rate});
        const std::string n = "u=(" + format_short(u) + "," + format_short(u) + ")";
        rec.at_most(n + " |mean [X1,X2]_T| / se", std::abs(e.mean) / e.std_error, 3.0);
        if (u != 0.0) {
            // Independent clocks of rate 1/u^2 each: both jump with probability ~ (dt/u^2)^2.
            const double scale = grid.dt() * grid.dt() / (u * u * u * u);
            rec.at_most(n + " simultaneous-jump rate / (dt/u^2)^2", rate / scale, 10.0);
        }
    }
    rec.write(t, "orthogonality.csv");
}

inline void ito_check(const ExperimentConfig& c, Recorder& rec) {
    const Problem p = closed_form(c);
    const ControlBounds bounds = c.bounds();
    const Vec y0 = Vec::Constant(1, c.probe_y);
    Table t;
    t.columns = {"case", "dt", "paths", "statistic"};

    // Affine phi: exact identity along any path.
    const TestFunction affine = TestFunction::affine(0.7, Vec::Constant(1, 1.3), 0.2);
    const TestFunction time_only = TestFunction::affine(1.0, Vec::Zero(1), 0.0);
    const TimeGrid grid = TimeGrid::with_step(c.t0, c.T, c.dt);
    const std::vector<Policy> policies = {
        constant_policy(ControlPoint::jumps({0.0})), constant_policy(ControlPoint::jumps({c.jump_u})),
        [u = c.jump_u](double, const Vec& y) { return ControlPoint::jumps({y[0] < 0.0 ? u : 0.0}); }};
    double worst = 0.0;
    for (std::size_t k = 0; k < policies.size(); ++k) {
        for (std::size_t q = 0; q < 20; ++q) {
            const ControlledPath path =
                simulate_controlled(p.coeffs, bounds, y0, policies[k], grid, child_seed(c.seed, 40 + k), q);
            worst = std::max(worst, ito_residual(path, affine, p.coeffs));
            worst = std::max(worst, ito_residual(path, time_only, p.coeffs));
        }
    }
    t.add_row({0.0, grid.dt(), 60.0, worst});
    rec.at_most("affine phi max residual", worst, 1e-10);

    // phi = y^2 under a pure-jump control: first order in dt.
    const TestFunction square = TestFunction::square(1);
    const Policy jump = constant_policy(ControlPoint::jumps({c.jump_u}));
    double stat[2] = {0.0, 0.0};
    for (int level = 0; level < 2; ++level) {
        const TimeGrid g = TimeGrid::with_step(c.t0, c.T, c.jump_dt / (level ? 2.0 : 1.0));
        RunningStats s;
        for (std::size_t q = 0; q < c.residual_paths; ++q)
            s.push(ito_residual(simulate_controlled(p.coeffs, bounds, y0, jump, g,
                                                    child_seed(c.seed, 50 + level), q),
                                square, p.coeffs));
        stat[level] = s.mean();
        t.add_row({1.0, g.dt(), double(c.residual_paths), s.mean()});
    }
    rec.inside("phi=y^2 u=" + format_short(c.jump_u) + " mean residual ratio dt/(dt/2)",
               stat[0] / stat[1], 1.5, 2.5);
    rec.write(t, "ito-check.csv");
}

inline void closed_form_hjb(const ExperimentConfig& c, Recorder& rec) {
    const Problem p = closed_form(c);
    const ControlGrid controls = make_control_grid(c, 1);
    const ValueField f = solve_problem(c, p, controls, c.dy);
    const Window window = radius_window(c.check_radius);
    auto exact = [&](double t, const Vec& y) { return closed_form_value(c, t, y); };
    rec.at_most("max |V - (y^2 + T - t)| on |y| <= " + format_short(c.check_radius),
                max_node_error(f, window, exact), c.tolerance);

    std::size_t mismatched = 0;
    double lo = f.values[0][0];
    double hi = lo;
    double g_lo = f.values.back()[0];
    double g_hi = g_lo;
    for (std::size_t j = 0; j < f.space.nodes(); ++j) {
        if (f.values.back()[j] != p.cost(f.space.node(j))) ++mismatched;
        g_lo = std::min(g_lo, f.values.back()[j]);
        g_hi = std::max(g_hi, f.values.back()[j]);
    }
    for (const auto& slice : f.values)
        for (double v : slice) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    rec.at_most("terminal nodes differing from g", double(mismatched), 0.0);
    rec.at_least("min V over the lattice (range of g starts at " + format_short(p.cost.lower) + ")",
                 lo, p.cost.lower);
    rec.at_most("max V over the lattice (range of g ends at " + format_short(p.cost.upper) + ")",
                hi, p.cost.upper);
    rec.note("values on the lattice span [" + format_short(lo) + ", " + format_short(hi) +
             "]; g at the nodes spans [" + format_short(g_lo) + ", " + format_short(g_hi) + "]");
    const Window interior = interior_window(f.space, controls, 1.0);
    rec.at_most("discrete equation residual on the interior", residual(f, controls, p.coeffs, interior),
                1e-10);
    rec.note("cfl number " + format_short(f.cfl_number) + ", steps " +
             std::to_string(f.time.n_steps));

    Table err;
    err.columns = {"t", "max_error"};
    for (std::size_t k = 0; k < f.slices(); ++k) {
        double e = 0.0;
        for (std::size_t j = 0; j < f.space.nodes(); ++j) {
            const Vec y = f.space.node(j);
            if (window.contains(y)) e = std::max(e, std::abs(f.values[k][j] - exact(f.slice_time(k), y)));
        }
        err.add_row({f.slice_time(k), e});
    }
    rec.write(err, "closed-form-error.csv");
    rec.write(field_table(f), "value-field.csv");
}

inline void mc_vs_pdde(const ExperimentConfig& c, Recorder& rec) {
    const ControlGrid controls = make_control_grid(c, 1);
    const TimeGrid grid = TimeGrid::with_step(c.probe_t, c.T, c.dt);
    Table t;
    t.columns = {"problem", "t", "y", "solver", "mc_best", "mc_se", "best_control"};

    const Problem quad = closed_form(c);
    const ValueField fq = solve_problem(c, quad, controls, c.dy);
    const Vec y0 = Vec::Constant(1, c.probe_y);
    const auto sweep = mc_value_constant_controls(quad.coeffs, quad.cost, y0, controls, c.paths,
                                                  grid, child_seed(c.seed, 60));
    const double v = interp(fq, c.probe_t, y0);
    const Estimate& e = sweep.best_estimate();
    t.add_row({0.0, c.probe_t, c.probe_y, v, e.mean, e.std_error, double(sweep.best)});
    rec.at_most("closed form |MC - V| - 3 se at (" + format_short(c.probe_t) + ", " +
                    format_short(c.probe_y) + ")",
                std::abs(e.mean - v) - 3.0 * e.std_error, c.tolerance);

    const Problem cosine = closed_form(c, "cosine");
    const ValueField fc = solve_problem(c, cosine, controls, c.dy);
    const TimeGrid cgrid = TimeGrid::with_step(c.probe_t, c.T, c.cosine_dt);
    for (std::size_t k = 0; k < c.cosine_probes.size(); ++k) {
        const Vec y = Vec::Constant(1, c.cosine_probes[k]);
        const auto s = mc_value_constant_controls(cosine.coeffs, cosine.cost, y, controls, c.paths,
                                                  cgrid, child_seed(c.seed, 61 + k));
        const double vs = interp(fc, c.probe_t, y);
        const Estimate& es = s.best_estimate();
        t.add_row({1.0, c.probe_t, c.cosine_probes[k], vs, es.mean, es.std_error, double(s.best)});
        rec.at_most("cos y: V - (MC best + 3 se) at y = " + format_short(c.cosine_probes[k]),
                    vs - (es.mean + 3.0 * es.std_error), c.tolerance);
    }
    rec.note("problem 0 = closed form, 1 = cos y; best_control indexes the control grid");
    rec.write(t, "mc-vs-pdde.csv");
}

inline void dpp_check(const ExperimentConfig& c, Recorder& rec) {
    const Problem p = closed_form(c);
    const ControlGrid controls = make_control_grid(c, 1);
    const ValueField f = solve_problem(c, p, controls, c.dy);
    const Vec y0 = Vec::Constant(1, c.dpp_y);
    const DppGap zero = dpp_gap(p.coeffs, f, c.probe_t, y0, 0.0, controls, 2, c.dt, c.seed);
    rec.at_most("gap at h = 0", std::abs(zero.gap), 0.0);
    const DppGap g = dpp_gap(p.coeffs, f, c.probe_t, y0, c.dpp_h, controls, c.inner_paths, c.dt,
                             child_seed(c.seed, 70));
    const double slack = c.tolerance + 3.0 * g.std_error;
    rec.at_least("gap lower side", g.gap, -slack);
    rec.at_most("gap upper side (C_h pinned at " + format_short(c.c_h_bound) + ")", g.gap,
                c.c_h_bound * c.dpp_h + slack);
    rec.note("measured C_h = " + format_short(g.c_h) + ", clamped fraction " +
             format_short(g.clamped_fraction));
    Table t;
    t.columns = {"control", "u", "mean", "se"};
    for (std::size_t k = 0; k < controls.size(); ++k)
        t.add_row({double(k), controls[k].u[0], g.per_control[k].mean, g.per_control[k].std_error});
    t.metadata["gap"] = format_double(g.gap);
    t.metadata["c_h"] = format_double(g.c_h);
    t.metadata["h"] = format_double(c.dpp_h);
    rec.write(t, "dpp-check.csv");
}

inline void counterexample(const ExperimentConfig& c, Recorder& rec) {
    const TimeGrid grid = TimeGrid::with_step(0.0, c.horizon, c.ce_dt);
    Table t;
    t.columns = {"pair", "switch_step", "passage_x", "passage_x_prime", "jump_x", "jump_x_prime"};
    std::size_t kept = 0;
    std::size_t censored = 0;
    std::size_t flag_x = 0;
    std::size_t flag_xp = 0;
    std::size_t shared_mismatch = 0;
    const std::size_t max_attempts = 10 * c.pairs;
    std::size_t i = 0;
    for (; kept < c.pairs && i < max_attempts; ++i) {
        const CounterexamplePair pair = counterexample_paths(grid, c.seed, i);
        for (std::size_t k = 0; k < grid.n_steps; ++k) {
            if (pair.x.jumps(k, 0) != pair.x_prime.jumps(k, 0)) ++shared_mismatch;
            const bool before = !pair.switch_step || k < *pair.switch_step;
            const double a = pair.x.increment(k, 0);
            const double b = pair.x_prime.increment(k, 0);
            const double tol = 1e-9 * (1.0 + std::abs(pair.x.x(k, 0)) + std::abs(pair.x_prime.x(k, 0)));
            if (std::abs(before ? a + b : a - b) > tol) ++shared_mismatch;
        }
        if (pair.censored) {
            ++censored;
            continue;
        }
        ++kept;
        flag_x += pair.jump_at_passage_x;
        flag_xp += pair.jump_at_passage_x_prime;
        t.add_row({double(i), double(*pair.switch_step), double(*pair.passage_x),
                   double(*pair.passage_x_prime), double(pair.jump_at_passage_x),
                   double(pair.jump_at_passage_x_prime)});
    }
    const double n = double(kept);
    const double freq_x = kept ? double(flag_x) / n : 0.0;
    const double freq_xp = kept ? double(flag_xp) / n : 0.0;
    rec.at_least("non-censored pairs", n, double(c.pairs));
    rec.at_most("X jump-at-passage frequency", freq_x, 0.0);
    rec.check("X' 99% lower confidence bound", wilson_lower_bound(flag_xp, kept),
              wilson_lower_bound(flag_xp, kept) > 0.0, "> 0");
    const double band = 4.0 * std::sqrt(c.expected_frequency * (1.0 - c.expected_frequency) / std::max(n, 1.0)) + 0.01;
    rec.at_most("|X' frequency - oracle " + format_short(c.expected_frequency) + "|",
                std::abs(freq_xp - c.expected_frequency), band);
    rec.at_most("shared-randomness mismatches", double(shared_mismatch), 0.0);
    rec.note("pairs simulated " + std::to_string(i) + ", censored " + std::to_string(censored) +
             ", X' frequency " + format_short(freq_xp));
    rec.write(t, "counterexample.csv");
    const CounterexamplePair first = counterexample_paths(grid, c.seed, 0);
    Table paths;
    paths.columns = {"time", "X", "X_prime", "u", "jump"};
    for (std::size_t k = 0; k <= grid.n_steps; ++k)
        paths.add_row({first.x.times[k], first.x.x(k, 0), first.x_prime.x(k, 0),
                       k ? first.x.u(k - 1, 0) : 0.0, k ? double(first.x.jumps(k - 1, 0)) : 0.0});
    rec.write(paths, "counterexample-path.csv");
    Table summary;
    summary.columns = {"kept", "censored", "flag_x", "flag_x_prime", "freq_x_prime", "lower_99"};
    summary.add_row({n, double(censored), double(flag_x), double(flag_xp), freq_xp,
                     wilson_lower_bound(flag_xp, kept)});
    rec.write(summary, "counterexample-summary.csv");
}

inline void refine_check_recipe(const ExperimentConfig& c, Recorder& rec) {
    const Problem p = closed_form(c);
    const ControlGrid controls = make_control_grid(c, 1);
    const ValueField coarse = solve_problem(c, p, controls, c.dy);
    const ValueField fine = solve_problem(c, p, controls, c.dy / 2.0);
    const Window window = radius_window(c.check_radius);
    auto exact = [&](double t, const Vec& y) { return closed_form_value(c, t, y); };
    const RefineResult r = refine_check(coarse, fine, window, exact);
    rec.at_most("coarse error", *r.coarse_error, c.tolerance);
    rec.at_most("fine error", *r.fine_error, c.tolerance);
    rec.check("fine error strictly below coarse error", *r.fine_error,
              *r.fine_error < *r.coarse_error, "< " + format_short(*r.coarse_error));
    rec.note("sup |coarse - fine| on fine nodes " + format_short(r.sup_difference) +
             "; errors read through interpolation at " + std::to_string(r.probes) +
             " probes per slice");

    const TimeGrid grid = TimeGrid::with_step(c.probe_t, c.T, c.dt);
    const Vec y0 = Vec::Constant(1, c.probe_y);
    const double v = interp(fine, c.probe_t, y0);
    Table t;
    t.columns = {"run", "seed", "mc_best", "mc_se", "solver"};
    Estimate est[2];
    for (int run = 0; run < 2; ++run) {
        const std::uint64_t seed = child_seed(c.seed, 80 + run);
        est[run] = mc_value_constant_controls(p.coeffs, p.cost, y0, controls, c.paths, grid, seed)
                       .best_estimate();
        t.add_row({double(run), double(seed % (1ULL << 52)), est[run].mean, est[run].std_error, v});
        rec.at_most("MC run " + std::to_string(run + 1) + " |MC - V| - 3 se",
                    std::abs(est[run].mean - v) - 3.0 * est[run].std_error, c.tolerance);
    }
    const double se = std::hypot(est[0].std_error, est[1].std_error);
    rec.at_most("|MC run 1 - MC run 2| - 3 se", std::abs(est[0].mean - est[1].mean) - 3.0 * se,
                c.tolerance);
    Table e;
    e.columns = {"dy", "error", "sup_difference"};
    e.add_row({coarse.space.dy[0], *r.coarse_error, r.sup_difference});
    e.add_row({fine.space.dy[0], *r.fine_error, r.sup_difference});
    rec.write(e, "refine-check.csv");
    rec.write(t, "refine-mc.csv");
}

} // namespace detail

RunReport run_experiment(const ExperimentConfig& cfg, const std::string& recipe);

namespace detail {

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void determinism(const ExperimentConfig& c, Recorder& rec) {
    namespace fs = std::filesystem;
    for (const auto& name : c.repeat) {
        std::vector<fs::path> dirs;
        bool passed[2] = {false, false};
        for (int run = 0; run < 2; ++run) {
            ExperimentConfig sub = c;
            sub.out_dir = (fs::path(c.out_dir) / ("run-" + std::to_string(run + 1)) / name).string();
            passed[run] = run_experiment(sub, name).passed();
            dirs.emplace_back(sub.out_dir);
        }
        std::size_t compared = 0;
        std::size_t differing = 0;
        for (const auto& entry : fs::directory_iterator(dirs[0])) {
            if (entry.path().extension() != ".csv") continue;
            ++compared;
            const fs::path other = dirs[1] / entry.path().filename();
            if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) ++differing;
        }
        rec.check(name + ": CSV files differing between runs", double(differing),
                  differing == 0 && compared > 0, "== 0 of " + std::to_string(compared));
        rec.check(name + ": identical pass/fail", passed[0] == passed[1] ? 1.0 : 0.0,
                  passed[0] == passed[1], "== 1");
    }
}

} // namespace detail

/// Runs one recipe, writing its artifacts and report.txt into cfg.out_dir.
inline RunReport run_experiment(const ExperimentConfig& cfg, const std::string& recipe) {
    using Fn = void (*)(const ExperimentConfig&, detail::Recorder&);
    static const std::map<std::string, Fn> kRecipes = {
        {"kernel-masses", &detail::kernel_masses},
        {"martingale-stats", &detail::martingale_stats},
        {"structure-residual", &detail::structure_residual_recipe},
        {"orthogonality", &detail::orthogonality},
        {"ito-check", &detail::ito_check},
        {"closed-form-hjb", &detail::closed_form_hjb},
        {"mc-vs-pdde", &detail::mc_vs_pdde},
        {"dpp-check", &detail::dpp_check},
        {"counterexample", &detail::counterexample},
        {"refine-check", &detail::refine_check_recipe},
        {"determinism", &detail::determinism},
    };
    auto it = kRecipes.find(recipe);
    if (it == kRecipes.end()) {
        std::string known;
        for (const auto& n : recipe_names()) known += (known.empty() ? "" : ", ") + n;
        throw PreconditionError("unknown recipe '" + recipe + "' (valid: " + known + ")");
    }
    std::filesystem::create_directories(cfg.out_dir);
    RunReport report;
    report.recipe = recipe;
    report.config_hash = cfg.hash();
    report.seed = cfg.seed;
    report.defaults = cfg.defaulted;
    detail::Recorder rec(report, cfg.out_dir);
    try {
        it->second(cfg, rec);
    } catch (const Error& e) {
        rec.check(std::string("recipe raised: ") + e.what(), 0.0, false, "no error");
    }
    std::ofstream os(std::filesystem::path(cfg.out_dir) / "report.txt", std::ios::binary);
    os << render_report(report);
    return report;
}

} // namespace nmart
