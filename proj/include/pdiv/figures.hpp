#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pdiv/config.hpp"
#include "pdiv/dividend_solver.hpp"
#include "pdiv/reflection_simulator.hpp"

namespace pdiv {

enum class FigureKind { g_curve, value_curves, beta_sweep, r_sweep, vi_report, mc_report };

const char* to_string(FigureKind kind) noexcept;

struct FigureSpec {
    FigureKind kind = FigureKind::g_curve;
    std::vector<double> x_grid;
    std::vector<double> b_list;
    std::vector<double> beta_grid;
    std::vector<double> r_grid;
    std::string output_path;  // empty: stdout

    /// Grids the kind uses must be nonempty and strictly increasing (InvalidArgument otherwise).
    void validate() const;
};

/// "0.1,0.2,1e-3" -> values. Throws InvalidArgument on malformed entries.
std::vector<double> parse_grid(std::string_view text);
void require_increasing(std::string_view name, const std::vector<double>& grid);

std::vector<double> linspace(double lo, double hi, std::size_t n);
std::vector<double> default_beta_grid();  // 1.01..1.09, 1.1..1.9, 2..20
std::vector<double> default_r_grid();     // 1e-4..9e-4, ..., 1..10, 20..50

/// Rows are kept as preformatted strings so that output is byte-stable.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

std::string format_number(double v);

/// "# config_hash=...,version=..." then the header row then the data rows.
void write_csv(std::ostream& out, const ProblemConfig& config, const CsvTable& table);

BarrierProblem make_problem(const ProblemConfig& config);

/// b, g(b), is_b_star; b* is inserted as its own flagged row.
CsvTable g_curve_table(const BarrierProblem& problem, const BarrierSolution& solution, const std::vector<double>& b_grid);

/// Barriers plotted next to v_{b*}: {0, b*/2, 3b*/2} when b* > 0, else {0.5, 1, 1.5}.
std::vector<double> comparison_barriers(const BarrierSolution& solution);

/// b, is_optimal, x, value, is_marker; one curve per barrier plus a (b, v_b(b)) marker row.
CsvTable value_table(const BarrierProblem& problem, const BarrierSolution& solution, const std::vector<double>& b_list,
                     const std::vector<double>& x_grid);

enum class SweepParameter { beta, r };

struct SweepCurve {
    double parameter = 0.0;
    double b_star = 0.0;
    std::vector<double> values;  // v_{b*} on the x grid
    double value_at_b_star = 0.0;
};

/// Solves the problem at every grid value (fanned out over workers) and evaluates v_{b*} on x_grid.
/// Curves come back sorted by parameter.
std::vector<SweepCurve> sweep(const ProblemConfig& config, SweepParameter parameter, const std::vector<double>& grid,
                              const std::vector<double>& x_grid, unsigned workers = 0);

/// parameter, b_star, x, value, is_marker, label ("large_r_proxy" on the largest r).
CsvTable sweep_table(SweepParameter parameter, const std::vector<SweepCurve>& curves, const std::vector<double>& x_grid);

struct MonotoneCheck {
    bool value_ok = true;
    bool barrier_ok = true;
    double worst_value_violation = 0.0;
    double worst_barrier_violation = 0.0;
    bool passed() const { return value_ok && barrier_ok; }
};

/// beta: v_{b*} nonincreasing and b* nondecreasing in beta.
/// r: v_{b*} nondecreasing and b* nondecreasing in r.
MonotoneCheck check_sweep(SweepParameter parameter, const std::vector<SweepCurve>& curves, double tolerance = 1e-9);

CsvTable vi_table(const VIReport& report);

struct McRow {
    double b = 0.0;
    double x = 0.0;
    double analytic = 0.0;
    EstimateResult estimate;
    bool agrees() const;  // |mean - analytic| <= max(3 SE, 1% |analytic|)
};

std::vector<McRow> mc_compare(const BarrierProblem& problem, const std::vector<double>& b_list,
                              const std::vector<double>& x_grid, const SimConfig& sim);
CsvTable mc_table(const std::vector<McRow>& rows);
CsvTable bias_table(double b, double x, double analytic, const BiasProbe& probe);

}  // namespace pdiv
