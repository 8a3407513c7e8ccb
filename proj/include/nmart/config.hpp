#pragma once

/// Experiment configuration: "[section]" headers and "key = value" lines,
/// '#' or ';' comments. Parsing reports every problem found, each with its
/// line number.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nmart/csv.hpp"
#include "nmart/errors.hpp"
#include "nmart/problem.hpp"
#include "nmart/types.hpp"

namespace nmart {

struct ExperimentConfig {
    // [run]
    std::uint64_t seed = 20240601;
    std::string out_dir = "nmart-out";

    // [problem]
    std::string tag = "closed_form";
    std::size_t m = 1;
    std::size_t d = 1;
    double t0 = 0.0;
    double T = 1.0;
    ProblemParams params{{"sigma", 1.0}};

    // [measure]
    std::string measure = "inverse_square_positive";
    double measure_scale = 1.0;
    std::string measure_table;
    std::vector<double> kernel_u{2.0, 1.0};

    // [controls]
    double delta0 = 0.25;
    double cap = 1.0;
    std::vector<double> u_levels{0.0, 0.5, -0.5, 1.0, -1.0};
    std::vector<double> pi_levels;

    // [grid]
    double y_min = -4.0;
    double y_max = 4.0;
    double dy = 0.05;
    double check_radius = 2.0; ///< errors are measured on |y| <= this

    // [mc]
    std::size_t paths = 10000;
    double dt = 1e-3;
    double probe_t = 0.0;
    double probe_y = 1.0;
    std::vector<double> cosine_probes{-1.0, -0.5, 0.0, 0.5, 1.0};
    double cosine_dt = 1e-3;
    double tolerance = 2e-2;

    // [residual]
    std::size_t residual_paths = 100;
    double jump_dt = 2e-5;
    double jump_u = 0.5;
    std::size_t rms_paths = 1000;
    double rms_dt = 1e-3;

    // [dpp]
    double dpp_h = 0.1;
    double dpp_y = 1.0;
    std::size_t inner_paths = 10000;
    double c_h_bound = 1.0;

    // [counterexample]
    std::size_t pairs = 10000;
    double ce_dt = 1e-2;
    double horizon = 50.0;
    double expected_frequency = 0.489;

    // [determinism]
    std::vector<std::string> repeat{"kernel-masses", "closed-form-hjb", "counterexample"};

    /// Keys left at their defaults, as "section.key".
    std::vector<std::string> defaulted;

    /// Effective settings in schema order; the output directory is left
    /// out of the hash since it does not affect results.
    std::string canonical(bool with_output = true) const;
    std::uint64_t hash() const;
    ControlBounds bounds() const { return ControlBounds(delta0, cap); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline bool to_double(const std::string& s, double& v) {
    try {
        v = parse_double(s);
        return std::isfinite(v);
    } catch (const Error&) {
        return false;
    }
}

inline bool to_count(const std::string& s, std::uint64_t& v) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::string join_numbers(const std::vector<double>& v) {
    std::string out;
    for (double x : v) out += (out.empty() ? "" : ", ") + format_double(x);
    return out;
}

inline std::string join_words(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& x : v) out += (out.empty() ? "" : ", ") + x;
    return out;
}

/// Setter returns an error message or empty on success.
using Setter = std::function<std::string(ExperimentConfig&, const std::string&)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct KeySpec {
    Setter set;
    Getter get;
};

inline Setter real(double ExperimentConfig::*field) {
    return [field](ExperimentConfig& c, const std::string& v) -> std::string {
        double x = 0.0;
        if (!to_double(v, x)) return "expected a finite number, got '" + v + "'";
        c.*field = x;
        return {};
    };
}

inline Setter count(std::size_t ExperimentConfig::*field) {
    return [field](ExperimentConfig& c, const std::string& v) -> std::string {
        std::uint64_t x = 0;
        if (!to_count(v, x) || x == 0) return "expected a positive integer, got '" + v + "'";
        c.*field = static_cast<std::size_t>(x);
        return {};
    };
}

inline Setter reals(std::vector<double> ExperimentConfig::*field) {
    return [field](ExperimentConfig& c, const std::string& v) -> std::string {
        std::vector<double> out;
        for (const auto& item : split_list(v)) {
            double x = 0.0;
            if (!to_double(item, x)) return "expected a list of numbers, got '" + item + "'";
            out.push_back(x);
        }
        c.*field = out;
        return {};
    };
}

inline Setter param(const std::string& name) {
    return [name](ExperimentConfig& c, const std::string& v) -> std::string {
        double x = 0.0;
        if (!to_double(v, x)) return "expected a finite number, got '" + v + "'";
        c.params[name] = x;
        return {};
    };
}

inline Getter show_real(double ExperimentConfig::*field) {
    return [field](const ExperimentConfig& c) { return format_double(c.*field); };
}
inline Getter show_count(std::size_t ExperimentConfig::*field) {
    return [field](const ExperimentConfig& c) { return std::to_string(c.*field); };
}
inline Getter show_reals(std::vector<double> ExperimentConfig::*field) {
    return [field](const ExperimentConfig& c) { return join_numbers(c.*field); };
}
inline Getter show_param(const std::string& name, double fallback) {
    return [name, fallback](const ExperimentConfig& c) {
        auto it = c.params.find(name);
        return format_double(it == c.params.end() ? fallback : it->second);
    };
}

/// Schema: section -> key -> accessors, in canonical order.
inline const std::map<std::string, std::map<std::string, KeySpec>>& schema() {
    using C = ExperimentConfig;
    static const std::map<std::string, std::map<std::string, KeySpec>> kSchema = {
        {"run",
         {{"seed",
           {[](C& c, const std::string& v) -> std::string {
                std::uint64_t x = 0;
                if (!to_count(v, x) || x == 0) return "seed must be a positive integer";
                c.seed = x;
                return {};
            },
            [](const C& c) { return std::to_string(c.seed); }}},
          {"out",
           {[](C& c, const std::string& v) -> std::string {
                if (v.empty()) return "output directory must not be empty";
                c.out_dir = v;
                return {};
            },
            [](const C& c) { return c.out_dir; }}}}},
        {"problem",
         {{"tag",
           {[](C& c, const std::string& v) -> std::string {
                const auto& tags = problems::tags();
                if (std::find(tags.begin(), tags.end(), v) == tags.end())
                    return "unknown problem tag '" + v + "' (known: " + join_words(tags) + ")";
                c.tag = v;
                return {};
            },
            [](const C& c) { return c.tag; }}},
          {"m", {count(&C::m), show_count(&C::m)}},
          {"d", {count(&C::d), show_count(&C::d)}},
          {"t0", {real(&C::t0), show_real(&C::t0)}},
          {"T", {real(&C::T), show_real(&C::T)}},
          {"sigma", {param("sigma"), show_param("sigma", 1.0)}},
          {"kappa", {param("kappa"), show_param("kappa", 1.0)}},
          {"theta", {param("theta"), show_param("theta", 0.0)}},
          {"level", {param("level"), show_param("level", 1.0)}},
          {"pi_max", {param("pi_max"), show_param("pi_max", 2.0)}}}},
        {"measure",
         {{"family",
           {[](C& c, const std::string& v) -> std::string {
                if (v != "inverse_square_positive" && v != "user_table")
                    return "unknown measure family '" + v +
                           "' (known: inverse_square_positive, user_table)";
                c.measure = v;
                return {};
            },
            [](const C& c) { return c.measure; }}},
          {"scale", {real(&C::measure_scale), show_real(&C::measure_scale)}},
          {"table",
           {[](C& c, const std::string& v) -> std::string {
                c.measure_table = v;
                return {};
            },
            [](const C& c) { return c.measure_table; }}},
          {"u", {reals(&C::kernel_u), show_reals(&C::kernel_u)}}}},
        {"controls",
         {{"delta0", {real(&C::delta0), show_real(&C::delta0)}},
          {"cap", {real(&C::cap), show_real(&C::cap)}},
          {"u_levels", {reals(&C::u_levels), show_reals(&C::u_levels)}},
          {"pi_levels", {reals(&C::pi_levels), show_reals(&C::pi_levels)}}}},
        {"grid",
         {{"y_min", {real(&C::y_min), show_real(&C::y_min)}},
          {"y_max", {real(&C::y_max), show_real(&C::y_max)}},
          {"dy", {real(&C::dy), show_real(&C::dy)}},
          {"check_radius", {real(&C::check_radius), show_real(&C::check_radius)}}}},
        {"mc",
         {{"paths", {count(&C::paths), show_count(&C::paths)}},
          {"dt", {real(&C::dt), show_real(&C::dt)}},
          {"probe_t", {real(&C::probe_t), show_real(&C::probe_t)}},
          {"probe_y", {real(&C::probe_y), show_real(&C::probe_y)}},
          {"cosine_probes", {reals(&C::cosine_probes), show_reals(&C::cosine_probes)}},
          {"cosine_dt", {real(&C::cosine_dt), show_real(&C::cosine_dt)}},
          {"tolerance", {real(&C::tolerance), show_real(&C::tolerance)}}}},
        {"residual",
         {{"paths", {count(&C::residual_paths), show_count(&C::residual_paths)}},
          {"jump_dt", {real(&C::jump_dt), show_real(&C::jump_dt)}},
          {"jump_u", {real(&C::jump_u), show_real(&C::jump_u)}},
          {"rms_paths", {count(&C::rms_paths), show_count(&C::rms_paths)}},
          {"rms_dt", {real(&C::rms_dt), show_real(&C::rms_dt)}}}},
        {"dpp",
         {{"h", {real(&C::dpp_h), show_real(&C::dpp_h)}},
          {"y", {real(&C::dpp_y), show_real(&C::dpp_y)}},
          {"inner_paths", {count(&C::inner_paths), show_count(&C::inner_paths)}},
          {"c_h_bound", {real(&C::c_h_bound), show_real(&C::c_h_bound)}}}},
        {"counterexample",
         {{"pairs", {count(&C::pairs), show_count(&C::pairs)}},
          {"dt", {real(&C::ce_dt), show_real(&C::ce_dt)}},
          {"horizon", {real(&C::horizon), show_real(&C::horizon)}},
          {"expected_frequency",
           {real(&C::expected_frequency), show_real(&C::expected_frequency)}}}},
        {"determinism",
         {{"recipes",
           {[](C& c, const std::string& v) -> std::string {
                c.repeat = split_list(v);
                return {};
            },
            [](const C& c) { return join_words(c.repeat); }}}}},
    };
    return kSchema;
}

} // namespace detail

inline std::string ExperimentConfig::canonical(bool with_output) const {
    std::string out;
    for (const auto& [section, keys] : detail::schema()) {
        out += "[" + section + "]\n";
        for (const auto& [key, spec] : keys) {
            if (!with_output && section == "run" && key == "out") continue;
            out += key + " = " + spec.get(*this) + "\n";
        }
    }
    return out;
}

/// FNV-1a over the canonical rendering of the effective configuration.
inline std::uint64_t ExperimentConfig::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : canonical(false)) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Cross-field checks; returns diagnostics (line numbers where known).
inline std::vector<std::string> validate_config(const ExperimentConfig& c,
                                                const std::map<std::string, int>& lines = {}) {
    std::vector<std::string> errors;
    auto at = [&](const std::string& key) {
        auto it = lines.find(key);
        return it == lines.end() ? std::string() : "line " + std::to_string(it->second) + ": ";
    };
    if (!(c.delta0 > 0.0))
        errors.push_back(at("controls.delta0") + "delta0 must be positive");
    if (!(c.cap >= c.delta0))
        errors.push_back(at("controls.cap") + "cap must be at least delta0");
    for (double u : c.u_levels) {
        const double a = std::abs(u);
        if (u != 0.0 && a < c.delta0)
            errors.push_back(at("controls.u_levels") + "u level " + format_double(u) +
                             " lies in the forbidden gap (0, delta0) with delta0 = " +
                             format_double(c.delta0) +
                             ": admissible jump controls need delta0 <= |u| <= C");
        else if (a > c.cap)
            errors.push_back(at("controls.u_levels") + "u level " + format_double(u) +
                             " exceeds the cap C = " + format_double(c.cap));
    }
    if (c.u_levels.empty()) errors.push_back(at("controls.u_levels") + "u_levels is empty");
    if (!(c.T > c.t0)) errors.push_back(at("problem.T") + "need t0 < T");
    if (c.m < 1 || c.m > 2) errors.push_back(at("problem.m") + "m must be 1 or 2");
    if (!(c.y_max > c.y_min)) errors.push_back(at("grid.y_max") + "need y_min < y_max");
    if (!(c.dy > 0.0)) errors.push_back(at("grid.dy") + "dy must be positive");
    if (!(c.dt > 0.0)) errors.push_back(at("mc.dt") + "dt must be positive");
    if (c.measure == "user_table" && c.measure_table.empty())
        errors.push_back(at("measure.family") + "user_table needs measure.table");
    const std::set<std::string> known = {"kernel-masses",   "martingale-stats", "structure-residual",
                                         "orthogonality",   "ito-check",        "closed-form-hjb",
                                         "mc-vs-pdde",      "dpp-check",        "counterexample",
                                         "refine-check"};
    for (const auto& r : c.repeat)
        if (!known.count(r))
            errors.push_back(at("determinism.recipes") + "unknown recipe '" + r + "'");
    return errors;
}

/// Parses and validates; throws ConfigError carrying every diagnostic.
inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::vector<std::string> errors;
    std::map<std::string, int> seen; // "section.key" -> line
    std::set<std::string> sections;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    const auto& schema = detail::schema();
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = detail::trim(raw.substr(0, raw.find_first_of("#;")));
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') {
                errors.push_back(where + "malformed section header '" + line + "'");
                continue;
            }
            section = detail::trim(line.substr(1, line.size() - 2));
            if (!schema.count(section)) errors.push_back(where + "unknown section [" + section + "]");
            sections.insert(section);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back(where + "expected 'key = value', got '" + line + "'");
            continue;
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (section.empty()) {
            errors.push_back(where + "key '" + key + "' appears before any section");
            continue;
        }
        auto sit = schema.find(section);
        if (sit == schema.end()) continue;
        auto kit = sit->second.find(key);
        if (kit == sit->second.end()) {
            errors.push_back(where + "unknown key '" + key + "' in [" + section + "]");
            continue;
        }
        const std::string full = section + "." + key;
        if (auto prev = seen.find(full); prev != seen.end()) {
            errors.push_back(where + "duplicate key '" + full + "' (lines " +
                             std::to_string(prev->second) + " and " + std::to_string(line_no) + ")");
            continue;
        }
        seen[full] = line_no;
        if (auto msg = kit->second.set(cfg, value); !msg.empty())
            errors.push_back(where + full + ": " + msg);
    }
    if (!sections.count("problem")) errors.push_back("missing required section [problem]");
    for (auto& e : validate_config(cfg, seen)) errors.push_back(std::move(e));
    if (!errors.empty()) throw ConfigError(errors);
    for (const auto& [sec, keys] : schema)
        for (const auto& [key, spec] : keys)
            if (!seen.count(sec + "." + key)) cfg.defaulted.push_back(sec + "." + key);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError({"cannot read config file '" + path + "'"});
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

/// Problem, measure and control grid described by a config.
inline Problem make_problem(const ExperimentConfig& c) {
    return problems::make(c.tag, c.m, c.d, c.params, c.t0, c.T);
}

inline ControlGrid make_control_grid(const ExperimentConfig& c, std::size_t d) {
    std::vector<Vec> pis;
    for (double p : c.pi_levels) pis.push_back(Vec::Constant(1, p));
    return ControlGrid::product(pis, c.u_levels, d, c.bounds());
}

} // namespace nmart
