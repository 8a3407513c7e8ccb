// Command-line front end: runs named recipes, evaluates operators at a
// point, and solves configured problems.
//
//   nmart <recipe> --config <path> [--out <dir>] [--seed <n>] [--paths <n>] [--dt <x>]
//   nmart operator --config <path> --t <t> --y <y,...> --u <u,...> [--pi <p,...>] [--phi <name>]
//   nmart solve --config <path> [--out <dir>]
//
// Exit status: 0 all checks pass, 1 a check failed, 2 usage or config error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nmart/nmart.hpp"

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

nmart::Vec to_vec(const std::vector<double>& v) {
    nmart::Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

nmart::TestFunction named_phi(const std::string& name, std::size_t m, double T) {
    if (name == "square") return nmart::TestFunction::square(m);
    if (name == "quartic") return nmart::TestFunction::quartic(m);
    if (name == "exp") return nmart::TestFunction::exponential(m);
    if (name == "value") return nmart::TestFunction::quadratic_value(m, T);
    throw nmart::PreconditionError("unknown test function '" + name +
                                   "' (known: square, quartic, exp, value)");
}

int run_operator(const nmart::ExperimentConfig& cfg, double t, const std::vector<double>& y,
                 const std::vector<double>& u, const std::vector<double>& pi,
                 const std::string& phi_name) {
    const nmart::Problem p = nmart::make_problem(cfg);
    if (y.size() != p.coeffs.m || u.size() != p.coeffs.d) {
        std::cerr << "operator: need " << p.coeffs.m << " y values and " << p.coeffs.d
                  << " u values\n";
        return kUsage;
    }
    const nmart::ControlPoint cp(to_vec(pi), to_vec(u));
    nmart::require_admissible(cp, cfg.bounds(), "operator");
    const nmart::TestFunction phi = named_phi(phi_name, p.coeffs.m, cfg.T);
    const nmart::Vec yv = to_vec(y);
    std::printf("problem %s, phi = %s, t = %s\n", p.tag.c_str(), phi_name.c_str(),
                nmart::format_double(t).c_str());
    for (std::size_t i = 0; i < p.coeffs.d; ++i) {
        const bool local = u[i] == 0.0;
        std::printf("  coordinate %zu: u = %s, A branch %s, L branch %s, A = %s\n", i + 1,
                    nmart::format_double(u[i]).c_str(), local ? "gradient" : "difference quotient",
                    local ? "Hessian form" : "second difference",
                    nmart::format_double(nmart::gen_A(i, cp, phi, t, yv, p.coeffs)).c_str());
    }
    std::printf("  L = %s\n", nmart::format_double(nmart::gen_L(cp, phi, t, yv, p.coeffs)).c_str());
    return kPass;
}

int run_solve(const nmart::ExperimentConfig& cfg) {
    const nmart::Problem p = nmart::make_problem(cfg);
    const nmart::ControlGrid controls = nmart::make_control_grid(cfg, p.coeffs.d);
    const nmart::ValueField f = nmart::detail::solve_problem(cfg, p, controls, cfg.dy);
    std::filesystem::create_directories(cfg.out_dir);
    const auto path = (std::filesystem::path(cfg.out_dir) / "value-field.csv").string();
    nmart::save_field(f, path);
    std::printf("solved %s on %zu nodes x %zu slices (cfl %s); wrote %s\n", p.tag.c_str(),
                f.space.nodes(), f.slices(), nmart::format_double(f.cfl_number).c_str(),
                path.c_str());
    return kPass;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Normal-martingale control toolkit"};
    std::string recipe;
    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    double dt = 0.0;
    double t = 0.0;
    std::vector<double> y;
    std::vector<double> u;
    std::vector<double> pi;
    std::string phi = "square";

    std::string valid = "operator, solve";
    for (const auto& r : nmart::recipe_names()) valid += ", " + r;
    app.add_option("recipe", recipe, "One of: " + valid)->required();
    app.add_option("--config", config_path, "Experiment config file")->required();
    app.add_option("--out", out, "Output directory");
    app.add_option("--seed", seed, "Root seed");
    app.add_option("--paths", paths, "Monte Carlo paths");
    app.add_option("--dt", dt, "Monte Carlo time step");
    app.add_option("--t", t, "operator: time");
    app.add_option("--y", y, "operator: state")->delimiter(',');
    app.add_option("--u", u, "operator: jump controls")->delimiter(',');
    app.add_option("--pi", pi, "operator: pi components")->delimiter(',');
    app.add_option("--phi", phi, "operator: square, quartic, exp or value");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kUsage;
    }

    const auto& names = nmart::recipe_names();
    if (recipe != "operator" && recipe != "solve" &&
        std::find(names.begin(), names.end(), recipe) == names.end()) {
        std::cerr << "unknown recipe '" << recipe << "'; valid: " << valid << '\n';
        return kUsage;
    }

    nmart::ExperimentConfig cfg;
    try {
        cfg = nmart::load_config(config_path);
        if (!out.empty()) cfg.out_dir = out;
        if (seed) cfg.seed = seed;
        if (paths) {
            cfg.paths = paths;
            cfg.inner_paths = paths;
        }
        if (dt > 0.0) cfg.dt = dt;
        if (auto errors = nmart::validate_config(cfg); !errors.empty())
            throw nmart::ConfigError(errors);
    } catch (const nmart::ConfigError& e) {
        for (const auto& d : e.diagnostics()) std::cerr << config_path << ": " << d << '\n';
        return kUsage;
    }

    try {
        if (recipe == "operator") {
            if (y.empty() || u.empty()) {
                std::cerr << "operator needs --y and --u\n";
                return kUsage;
            }
            return run_operator(cfg, t, y, u, pi, phi);
        }
        if (recipe == "solve") return run_solve(cfg);
        const nmart::RunReport report = nmart::run_experiment(cfg, recipe);
        std::cout << nmart::render_report(report);
        return report.passed() ? kPass : kFail;
    } catch (const nmart::PreconditionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const nmart::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFail;
    }
}
