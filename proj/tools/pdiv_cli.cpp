// pdiv: command-line front end for the bail-out periodic-dividend solver.
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "pdiv/config.hpp"
#include "pdiv/dividend_solver.hpp"
#include "pdiv/error.hpp"
#include "pdiv/figures.hpp"
#include "pdiv/reflection_simulator.hpp"

namespace {

using nlohmann::json;
using namespace pdiv;

constexpr int exit_usage = 2;
constexpr int exit_failure = 1;
constexpr int exit_assertion = 3;

struct Options {
    std::string config_path;
    std::string preset_name;
    std::string out;
    std::uint64_t seed = SimConfig{}.seed;
    std::size_t paths = 100000;
    double dt = 1e-3;
    double cutoff = 1e-4;
    bool antithetic = false;
    std::optional<std::string> x_grid;
    std::optional<std::string> b_list;
    std::optional<std::string> beta_grid;
    std::optional<std::string> r_grid;
    std::optional<double> barrier;
    std::string path_log;
    bool check = false;
    bool bias_probe = false;
    unsigned workers = 0;
};

struct AssertionFailed {
    std::string what;
};

void error_record(const std::string& command, const std::string& code, const std::string& message) {
    std::cerr << json{{"error", code}, {"command", command}, {"message", message}}.dump() << '\n';
}

ProblemConfig resolve_config(const Options& o) {
    if (!o.config_path.empty() && !o.preset_name.empty()) {
        throw Error(ErrorCode::InvalidArgument, "--config and --preset are mutually exclusive");
    }
    if (!o.config_path.empty()) return load_config(o.config_path);
    return preset(o.preset_name.empty() ? "case1" : o.preset_name);
}

std::vector<double> grid_or(const std::optional<std::string>& flag, std::vector<double> fallback) {
    return flag ? parse_grid(*flag) : std::move(fallback);
}

void emit(const Options& o, const std::string& text) {
    if (o.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream file(o.out, std::ios::binary);
    if (!file) throw Error(ErrorCode::InvalidArgument, "cannot open '" + o.out + "' for writing");
    file << text;
}

void emit_csv(const Options& o, const ProblemConfig& config, const CsvTable& table) {
    std::ostringstream buffer;
    write_csv(buffer, config, table);
    emit(o, buffer.str());
}

void run_solve(const Options& o) {
    const ProblemConfig config = resolve_config(o);
    const BarrierProblem problem = make_problem(config);
    const BarrierSolution sol = optimal_barrier(problem);
    json out = {
        {"name", config.name},
        {"config_hash", config_hash(config)},
        {"version", std::string(library_version())},
        {"variation", to_string(problem.diagnostics().variation_kind)},
        {"b_star", sol.b_star},
        {"C_b_star", sol.C_at_b_star},
        {"g_at_zero", sol.g_at_zero},
        {"g_at_b_star", g(problem, sol.b_star)},
        {"converged", sol.converged},
    };
    if (problem.diagnostics().variation_kind == Variation::bounded) {
        // g(0) reduces to beta - 1 - (r(beta - 1) + q beta) / (c Phi(q + r)); b* = 0 iff it is <= 0
        out["zero_barrier_criterion"] = sol.g_at_zero;
        out["zero_barrier_holds"] = sol.g_at_zero <= 0.0;
    }
    emit(o, out.dump(2) + "\n");
    if (!sol.converged) throw AssertionFailed{"b* bisection did not reach |g| <= 1e-10"};
}

void run_g_curve(const Options& o) {
    const ProblemConfig config = resolve_config(o);
    const std::vector<double> grid = grid_or(o.b_list, linspace(0.0, 20.0, 401));
    require_increasing("b", grid);
    const BarrierProblem problem = make_problem(config);
    emit_csv(o, config, g_curve_table(problem, optimal_barrier(problem), grid));
}

void run_value(const Options& o) {
    const ProblemConfig config = resolve_config(o);
    const std::vector<double> x = grid_or(o.x_grid, linspace(0.0, 10.0, 201));
    require_increasing("x", x);
    const BarrierProblem problem = make_problem(config);
    const BarrierSolution sol = optimal_barrier(problem);
    const std::vector<double> barriers = grid_or(o.b_list, comparison_barriers(sol));
    emit_csv(o, config, value_table(problem, sol, barriers, x));
    if (o.check) {
        const auto rows = dominance_scan(problem, sol, barriers, x);
        for (const auto& row : rows) {
            if (!row.dominated) {
                throw AssertionFailed{fmt::format("v_b* < v_b at b = {}, x = {}", row.b, row.x)};
            }
        }
    }
}

void run_sweep(const Options& o, SweepParameter parameter) {
    const ProblemConfig config = resolve_config(o);
    const std::vector<double> x = grid_or(o.x_grid, linspace(0.0, 10.0, 101));
    const std::vector<double> grid = parameter == SweepParameter::beta ? grid_or(o.beta_grid, default_beta_grid())
                                                                       : grid_or(o.r_grid, default_r_grid());
    require_increasing(parameter == SweepParameter::beta ? "beta" : "r", grid);
    require_increasing("x", x);
    const auto curves = sweep(config, parameter, grid, x, o.workers);
    emit_csv(o, config, sweep_table(parameter, curves, x));
    if (o.check) {
        const MonotoneCheck chk = check_sweep(parameter, curves);
        if (!chk.passed()) {
            throw AssertionFailed{fmt::format("monotonicity violated: value by {:.3e}, b* by {:.3e}",
                                              chk.worst_value_violation, chk.worst_barrier_violation)};
        }
    }
}

void run_simulate(const Options& o) {
    const ProblemConfig config = resolve_config(o);
    const BarrierProblem problem = make_problem(config);
    const BarrierSolution sol = optimal_barrier(problem);
    const std::vector<double> barriers = grid_or(o.b_list, {sol.b_star});
    const std::vector<double> x = grid_or(o.x_grid, {0.0, 1.0, 2.0});
    require_increasing("b", barriers);
    require_increasing("x", x);

    SimConfig sim;
    sim.time_step = o.dt;
    sim.n_paths = o.paths;
    sim.discount_cutoff = o.cutoff;
    sim.seed = o.seed;
    sim.antithetic = o.antithetic;
    sim.workers = o.workers;
    sim.validate();

    if (o.bias_probe) {
        const BiasProbe probe = bias_probe(problem, barriers.front(), x.front(), sim);
        const double analytic = value(problem, barriers.front(), x.front());
        emit_csv(o, config, bias_table(barriers.front(), x.front(), analytic, probe));
        return;
    }
    if (!o.path_log.empty()) {
        std::ofstream log(o.path_log, std::ios::binary);
        if (!log) throw Error(ErrorCode::InvalidArgument, "cannot open '" + o.path_log + "' for writing");
        estimate_value(problem, barriers.front(), x.front(), sim, &log);
    }
    const auto rows = mc_compare(problem, barriers, x, sim);
    emit_csv(o, config, mc_table(rows));
    if (o.check) {
        for (const auto& row : rows) {
            if (!row.agrees()) {
                throw AssertionFailed{fmt::format("MC disagrees at b = {}, x = {}: {} vs {} (SE {})", row.b, row.x,
                                                  row.estimate.mean, row.analytic, row.estimate.std_error)};
            }
        }
    }
}

void run_vi_check(const Options& o) {
    const ProblemConfig config = resolve_config(o);
    const BarrierProblem problem = make_problem(config);
    BarrierSolution sol = optimal_barrier(problem);
    if (o.barrier) {
        if (!(*o.barrier >= 0.0)) throw Error(ErrorCode::InvalidArgument, "--barrier must be >= 0");
        sol.b_star = *o.barrier;
    }
    const std::vector<double> x = grid_or(o.x_grid, vi_grid(sol.b_star));
    require_increasing("x", x);
    const VIReport report = vi_check(problem, sol, x);
    emit_csv(o, config, vi_table(report));
    report.require();
}

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config_path, "JSON configuration file");
    cmd->add_option("--preset", o.preset_name, "named preset")->check(CLI::IsMember({"case1", "case2"}));
    cmd->add_option("--out", o.out, "output file (default stdout)");
    cmd->add_option("--workers", o.workers, "worker threads (0: all cores)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bail-out optimal dividends with periodic (Poisson) payment opportunities"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(library_version()));
    Options o;

    auto* solve = app.add_subcommand("solve", "optimal barrier b*, C_b*, g(0)");
    auto* gcurve = app.add_subcommand("g-curve", "g(b) over a barrier grid");
    auto* value_cmd = app.add_subcommand("value", "v_b(x) for several barriers");
    auto* sweep_beta = app.add_subcommand("sweep-beta", "v_b* over a grid of beta");
    auto* sweep_r = app.add_subcommand("sweep-r", "v_b* over a grid of r");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimates next to analytic values");
    auto* vi = app.add_subcommand("vi-check", "variational-inequality residual report");
    for (auto* cmd : {solve, gcurve, value_cmd, sweep_beta, sweep_r, simulate, vi}) add_common(cmd, o);

    gcurve->add_option("--b-list", o.b_list, "comma-separated barriers");
    value_cmd->add_option("--b-list", o.b_list, "comma-separated barriers");
    value_cmd->add_option("--x-grid", o.x_grid, "comma-separated x values");
    value_cmd->add_flag("--check", o.check, "fail unless v_b* dominates every listed v_b");
    for (auto* cmd : {sweep_beta, sweep_r}) {
        cmd->add_option("--x-grid", o.x_grid, "comma-separated x values");
        cmd->add_flag("--check", o.check, "fail unless the monotonicity properties hold");
    }
    sweep_beta->add_option("--beta-grid", o.beta_grid, "comma-separated beta values");
    sweep_r->add_option("--r-grid", o.r_grid, "comma-separated r values");
    simulate->add_option("--b-list", o.b_list, "comma-separated barriers (default b*)");
    simulate->add_option("--x-grid", o.x_grid, "comma-separated starting points");
    simulate->add_option("--seed", o.seed, "base seed");
    simulate->add_option("--paths", o.paths, "number of paths");
    simulate->add_option("--dt", o.dt, "Euler time step");
    simulate->add_option("--cutoff", o.cutoff, "discount-factor cutoff");
    simulate->add_flag("--antithetic", o.antithetic, "antithetic pairs");
    simulate->add_option("--path-log", o.path_log, "per-path CSV for the first (b, x)");
    simulate->add_flag("--bias-probe", o.bias_probe, "rerun at dt, dt/2, dt/4 for the first (b, x)");
    simulate->add_flag("--check", o.check, "fail unless every row agrees within max(3 SE, 1%)");
    vi->add_option("--barrier", o.barrier, "barrier to test (default b*)");
    vi->add_option("--x-grid", o.x_grid, "comma-separated x values");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        error_record(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name(), "UsageError",
                     e.what());
        return exit_usage;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (*solve) run_solve(o);
        else if (*gcurve) run_g_curve(o);
        else if (*value_cmd) run_value(o);
        else if (*sweep_beta) run_sweep(o, SweepParameter::beta);
        else if (*sweep_r) run_sweep(o, SweepParameter::r);
        else if (*simulate) run_simulate(o);
        else if (*vi) run_vi_check(o);
    } catch (const AssertionFailed& e) {
        error_record(command, "AssertionFailed", e.what);
        return exit_assertion;
    } catch (const Error& e) {
        error_record(command, std::string(to_string(e.code())), e.what());
        if (e.code() == ErrorCode::ViolationFound) return exit_assertion;
        const bool usage = e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::InvalidConfig;
        return usage ? exit_usage : exit_failure;
    } catch (const std::exception& e) {
        error_record(command, "InternalError", e.what());
        return exit_failure;
    }
    return 0;
}
