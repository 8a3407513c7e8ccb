#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "nmart/nmart.hpp"

using namespace nmart;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> diagnostics_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.diagnostics();
    }
    return {};
}

bool any_contains(const std::vector<std::string>& items, const std::string& needle) {
    for (const auto& s : items)
        if (s.find(needle) != std::string::npos) return true;
    return false;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("nmart-test-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace

TEST(ParseConfig, MinimalConfigRecordsDefaults) {
    const auto cfg = parse_config("[problem]\ntag = cosine\n");
    EXPECT_EQ(cfg.tag, "cosine");
    EXPECT_EQ(cfg.seed, 20240601u);
    EXPECT_EQ(cfg.u_levels, (std::vector<double>{0.0, 0.5, -0.5, 1.0, -1.0}));
    EXPECT_TRUE(any_contains(cfg.defaulted, "run.seed"));
    EXPECT_TRUE(any_contains(cfg.defaulted, "grid.dy"));
    EXPECT_FALSE(any_contains(cfg.defaulted, "problem.tag"));
}

TEST(ParseConfig, ValuesAndComments) {
    const auto cfg = parse_config(
        "# header\n[run]\nseed = 7 ; trailing\n[problem]\nm = 2\nd = 2\nsigma = 0.5\n"
        "[controls]\nu_levels = 0, 0.3\ndelta0 = 0.3\n");
    EXPECT_EQ(cfg.seed, 7u);
    EXPECT_EQ(cfg.m, 2u);
    EXPECT_EQ(cfg.params.at("sigma"), 0.5);
    EXPECT_EQ(cfg.u_levels, (std::vector<double>{0.0, 0.3}));
}

TEST(ParseConfig, GapViolationCitesLine) {
    const auto errors = diagnostics_of("[problem]\n[controls]\nu_levels = 0, 0.1\n");
    ASSERT_EQ(errors.size(), 1u);
    EXPECT_NE(errors[0].find("line 3"), std::string::npos);
    EXPECT_NE(errors[0].find("forbidden gap (0, delta0)"), std::string::npos);
    EXPECT_NE(errors[0].find("delta0 <= |u| <= C"), std::string::npos);
}

TEST(ParseConfig, DuplicateKeyNamesBothLines) {
    const auto errors = diagnostics_of("[problem]\nT = 1\nT = 2\n");
    ASSERT_EQ(errors.size(), 1u);
    EXPECT_NE(errors[0].find("(lines 2 and 3)"), std::string::npos);
}

TEST(ParseConfig, CollectsEveryError) {
    const auto errors = diagnostics_of(
        "[run]\nspeed = 3\n[nonsense]\nx = 1\n[controls]\ncap = 2\nu_levels = 0, 1.5, 0.05\nbroken line\n");
    EXPECT_TRUE(any_contains(errors, "line 2: unknown key 'speed' in [run]"));
    EXPECT_TRUE(any_contains(errors, "line 3: unknown section [nonsense]"));
    EXPECT_TRUE(any_contains(errors, "line 8: expected 'key = value'"));
    EXPECT_TRUE(any_contains(errors, "forbidden gap"));
    EXPECT_TRUE(any_contains(errors, "missing required section [problem]"));
    EXPECT_FALSE(any_contains(errors, "exceeds the cap"));
    EXPECT_GE(errors.size(), 5u);
}

TEST(ParseConfig, UnknownTagAndBadNumbers) {
    const auto errors = diagnostics_of("[problem]\ntag = spline\nT = soon\n[determinism]\nrecipes = nope\n");
    EXPECT_TRUE(any_contains(errors, "line 2: problem.tag: unknown problem tag 'spline'"));
    EXPECT_TRUE(any_contains(errors, "line 3:"));
    EXPECT_TRUE(any_contains(errors, "unknown recipe 'nope'"));
}

TEST(ParseConfig, MissingFileIsConfigError) {
    EXPECT_THROW(load_config("/nonexistent/nmart.ini"), ConfigError);
}

TEST(ConfigHash, DeterministicAndOutputBlind) {
    const auto a = parse_config("[problem]\n[run]\nout = a\n");
    const auto b = parse_config("[problem]\n[run]\nout = b\n");
    const auto c = parse_config("[problem]\n[run]\nseed = 5\n");
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_EQ(a.hash(), parse_config("[problem]\n[run]\nout = a\n").hash());
    EXPECT_NE(a.hash(), c.hash());
    EXPECT_NE(a.canonical(), b.canonical());
}

TEST(ControlGridFromConfig, TensorProduct) {
    const auto cfg = parse_config("[problem]\n[controls]\nu_levels = 0, 1\npi_levels = 0.5, 2\n");
    const auto grid = make_control_grid(cfg, 2);
    EXPECT_EQ(grid.size(), 8u);
    EXPECT_TRUE(grid.includes_zero());
    EXPECT_EQ(grid[0].pi[0], 0.5);
    EXPECT_EQ(grid[7].u, (Vec(2) << 1.0, 1.0).finished());
}

TEST(Csv, EmptyTableIsHeaderOnly) {
    const auto dir = scratch_dir("csv-empty");
    Table t;
    t.columns = {"a", "b"};
    emit_csv(t, (dir / "t.csv").string());
    EXPECT_EQ(slurp(dir / "t.csv"), "a,b\n");
}

TEST(Csv, OneRowWithSeventeenDigits) {
    const auto dir = scratch_dir("csv-row");
    Table t;
    t.columns = {"x", "y"};
    t.add_row({0.1, -2.0});
    emit_csv(t, (dir / "t.csv").string());
    EXPECT_EQ(slurp(dir / "t.csv"), "x,y\n0.10000000000000001,-2\n");
    EXPECT_THROW(t.add_row({1.0}), PreconditionError);
    EXPECT_THROW(emit_csv(t, (dir / "missing" / "t.csv").string()), Error);
}

TEST(Csv, ReadBackWithMetadata) {
    Table t;
    t.columns = {"v"};
    t.metadata["note"] = "kept";
    t.add_row({1e-300});
    t.add_row({-0.0});
    std::stringstream ss;
    write_csv(ss, t);
    const Table back = read_csv(ss);
    EXPECT_EQ(back.metadata.at("note"), "kept");
    EXPECT_EQ(back.rows, t.rows);
}

TEST(Csv, ValueFieldRoundTripIsBitExact) {
    const auto dir = scratch_dir("field");
    const auto p = problems::make("cosine", 1, 1);
    const auto controls = ControlGrid::product({}, {0.0, 0.5, -0.5, 1.0, -1.0}, 1, ControlBounds{});
    DomainConfig dc;
    dc.lo = {-2.0, 0.0};
    dc.hi = {2.0, 0.0};
    dc.spacing = {0.1, 0.1};
    SolveOptions opts;
    opts.problem_tag = "cosine";
    const auto field = solve(p.coeffs, p.cost, build_grids(dc), controls, opts);
    const auto path = (dir / "field.csv").string();
    save_field(field, path);
    const auto back = load_field(path);
    EXPECT_EQ(back.values, field.values);
    EXPECT_EQ(back.policy, field.policy);
    EXPECT_EQ(back.problem_tag, "cosine");
    EXPECT_EQ(back.time.n_steps, field.time.n_steps);
    EXPECT_EQ(back.cfl_number, field.cfl_number);
    EXPECT_EQ(back.space.nodes(), field.space.nodes());
    for (std::size_t k = 0; k < field.slices(); ++k)
        for (std::size_t j = 0; j < field.space.nodes(); ++j)
            EXPECT_EQ(back.control_at(k, j), field.control_at(k, j));
    EXPECT_EQ(interp(back, 0.37, Vec::Constant(1, 0.123)), interp(field, 0.37, Vec::Constant(1, 0.123)));
}

TEST(Csv, PathTableColumns) {
    const TimeGrid grid(0.0, 1.0, 4);
    const auto path = simulate_path(ControlRule::constant({0.0, 1.0}), grid, 1);
    const Table t = path_table(path);
    EXPECT_EQ(t.columns, (std::vector<std::string>{"time", "X1", "X2", "u1", "u2", "jump1", "jump2"}));
    EXPECT_EQ(t.rows.size(), 5u);
    EXPECT_EQ(t.rows[0][3], 0.0);
    EXPECT_EQ(t.rows[1][4], 1.0);
}

TEST(RunExperiment, UnknownRecipeListsValidOnes) {
    ExperimentConfig cfg;
    try {
        run_experiment(cfg, "bogus");
        FAIL() << "expected PreconditionError";
    } catch (const PreconditionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("unknown recipe 'bogus'"), std::string::npos);
        EXPECT_NE(msg.find("closed-form-hjb"), std::string::npos);
        EXPECT_NE(msg.find("refine-check"), std::string::npos);
    }
}

TEST(RunExperiment, KernelMassesWritesReport) {
    const auto dir = scratch_dir("kernel");
    auto cfg = parse_config("[problem]\n");
    cfg.out_dir = dir.string();
    const RunReport report = run_experiment(cfg, "kernel-masses");
    EXPECT_TRUE(report.passed());
    EXPECT_EQ(report.config_hash, cfg.hash());
    EXPECT_EQ(report.seed, cfg.seed);
    EXPECT_FALSE(report.defaults.empty());
    const std::string text = slurp(dir / "report.txt");
    EXPECT_EQ(text, render_report(report));
    EXPECT_NE(text.find("result: PASS"), std::string::npos);
    for (const auto& a : report.artifacts) EXPECT_TRUE(fs::exists(dir / a)) << a;
}

TEST(RunExperiment, InfeasibleMeasureBecomesFailedCheck) {
    const auto dir = scratch_dir("bad-measure");
    auto cfg = parse_config("[problem]\n[measure]\nfamily = user_table\ntable = 1:1, 2:1\n");
    cfg.out_dir = dir.string();
    const RunReport report = run_experiment(cfg, "kernel-masses");
    EXPECT_FALSE(report.passed());
    EXPECT_TRUE(fs::exists(dir / "report.txt"));
}

TEST(Report, EmptyReportFails) {
    RunReport r;
    EXPECT_FALSE(r.passed());
    r.checks.push_back({"x", 1.0, "<= 2", true, 0.0});
    EXPECT_TRUE(r.passed());
    EXPECT_NE(render_report(r).find("PASS  x  value=1  require <= 2"), std::string::npos);
}
