#include "pdiv/figures.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "pdiv/error.hpp"
#include "pdiv/parallel.hpp"

namespace pdiv {

const char* to_string(FigureKind kind) noexcept {
    switch (kind) {
        case FigureKind::g_curve: return "g_curve";
        case FigureKind::value_curves: return "value_curves";
        case FigureKind::beta_sweep: return "beta_sweep";
        case FigureKind::r_sweep: return "r_sweep";
        case FigureKind::vi_report: return "vi_report";
        case FigureKind::mc_report: return "mc_report";
    }
    return "unknown";
}

void require_increasing(std::string_view name, const std::vector<double>& grid) {
    if (grid.empty()) throw Error(ErrorCode::InvalidArgument, fmt::format("{} grid is empty", name));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(grid[i])) throw Error(ErrorCode::InvalidArgument, fmt::format("{} grid has a non-finite entry", name));
        if (i > 0 && !(grid[i] > grid[i - 1])) {
            throw Error(ErrorCode::InvalidArgument, fmt::format("{} grid must be strictly increasing", name));
        }
    }
}

void FigureSpec::validate() const {
    switch (kind) {
        case FigureKind::g_curve: require_increasing("b", b_list); break;
        case FigureKind::value_curves:
            require_increasing("x", x_grid);
            require_increasing("b", b_list);
            break;
        case FigureKind::beta_sweep:
            require_increasing("x", x_grid);
            require_increasing("beta", beta_grid);
            break;
        case FigureKind::r_sweep:
            require_increasing("x", x_grid);
            require_increasing("r", r_grid);
            break;
        case FigureKind::vi_report: require_increasing("x", x_grid); break;
        case FigureKind::mc_report:
            require_increasing("x", x_grid);
            require_increasing("b", b_list);
            break;
    }
}

std::vector<double> parse_grid(std::string_view text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find(',', pos), text.size());
        std::string_view item = text.substr(pos, end - pos);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        if (item.empty()) {
            if (text.empty()) break;
            throw Error(ErrorCode::InvalidArgument, fmt::format("empty entry in grid '{}'", text));
        }
        double v = 0.0;
        const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (res.ec != std::errc{} || res.ptr != item.data() + item.size()) {
            throw Error(ErrorCode::InvalidArgument, fmt::format("cannot parse '{}' as a number", item));
        }
        out.push_back(v);
        pos = end + 1;
    }
    return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return out;
}

std::vector<double> default_beta_grid() {
    std::vector<double> out;
    for (int k = 1; k <= 9; ++k) out.push_back(1.0 + k / 100.0);
    for (int k = 1; k <= 9; ++k) out.push_back(1.0 + k / 10.0);
    for (int k = 2; k <= 20; ++k) out.push_back(k);
    return out;
}

std::vector<double> default_r_grid() {
    std::vector<double> out;
    for (int e = -4; e <= 0; ++e) {
        for (int k = 1; k <= 9; ++k) out.push_back(k * std::pow(10.0, e));
    }
    for (int k = 1; k <= 5; ++k) out.push_back(10.0 * k);
    return out;
}

std::string format_number(double v) { return fmt::format("{:.15g}", v); }

void write_csv(std::ostream& out, const ProblemConfig& config, const CsvTable& table) {
    out << "# config_hash=" << config_hash(config) << ",version=" << library_version() << '\n';
    for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << '\n';
    }
}

BarrierProblem make_problem(const ProblemConfig& config) {
    return BarrierProblem(config.model, config.q, config.r, config.beta);
}

CsvTable g_curve_table(const BarrierProblem& problem, const BarrierSolution& solution,
                       const std::vector<double>& b_grid) {
    require_increasing("b", b_grid);
    CsvTable t{{"b", "g", "is_b_star"}, {}};
    bool placed = false;
    auto emit = [&](double b, bool star) {
        t.rows.push_back({format_number(b), format_number(g(problem, b)), star ? "1" : "0"});
    };
    for (double b : b_grid) {
        if (b < 0.0) throw Error(ErrorCode::InvalidArgument, "barriers must be >= 0");
        if (!placed && solution.b_star <= b) {
            placed = true;
            emit(solution.b_star, true);
            if (solution.b_star == b) continue;
        }
        emit(b, false);
    }
    if (!placed) emit(solution.b_star, true);
    return t;
}

std::vector<double> comparison_barriers(const BarrierSolution& solution) {
    if (solution.b_star > 0.0) return {0.0, solution.b_star / 2.0, 1.5 * solution.b_star};
    return {0.5, 1.0, 1.5};
}

CsvTable value_table(const BarrierProblem& problem, const BarrierSolution& solution, const std::vector<double>& b_list,
                     const std::vector<double>& x_grid) {
    require_increasing("x", x_grid);
    require_increasing("b", b_list);
    std::vector<double> barriers = b_list;
    if (std::find(barriers.begin(), barriers.end(), solution.b_star) == barriers.end()) barriers.push_back(solution.b_star);
    std::sort(barriers.begin(), barriers.end());

    CsvTable t{{"b", "is_optimal", "x", "value", "is_marker"}, {}};
    for (double b : barriers) {
        if (b < 0.0) throw Error(ErrorCode::InvalidArgument, "barriers must be >= 0");
        const BarrierValue v(problem, b);
        const std::string opt = b == solution.b_star ? "1" : "0";
        for (double x : x_grid) t.rows.push_back({format_number(b), opt, format_number(x), format_number(v.value(x)), "0"});
        t.rows.push_back({format_number(b), opt, format_number(b), format_number(v.value(b)), "1"});
    }
    return t;
}

std::vector<SweepCurve> sweep(const ProblemConfig& config, SweepParameter parameter, const std::vector<double>& grid,
                              const std::vector<double>& x_grid, unsigned workers) {
    require_increasing(parameter == SweepParameter::beta ? "beta" : "r", grid);
    require_increasing("x", x_grid);
    std::vector<SweepCurve> curves(grid.size());
    parallel_for(grid.size(), workers, [&](std::size_t i) {
        ProblemConfig local = config;
        (parameter == SweepParameter::beta ? local.beta : local.r) = grid[i];
        const BarrierProblem problem = make_problem(local);
        const BarrierSolution sol = optimal_barrier(problem);
        const BarrierValue v(problem, sol.b_star);
        SweepCurve& c = curves[i];
        c.parameter = grid[i];
        c.b_star = sol.b_star;
        c.value_at_b_star = v.value(sol.b_star);
        c.values.reserve(x_grid.size());
        for (double x : x_grid) c.values.push_back(v.value(x));
    });
    std::sort(curves.begin(), curves.end(),
              [](const SweepCurve& a, const SweepCurve& b) { return a.parameter < b.parameter; });
    return curves;
}

CsvTable sweep_table(SweepParameter parameter, const std::vector<SweepCurve>& curves, const std::vector<double>& x_grid) {
    const bool is_r = parameter == SweepParameter::r;
    CsvTable t{{is_r ? "r" : "beta", "b_star", "x", "value", "is_marker", "label"}, {}};
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto& c = curves[i];
        const std::string label = is_r && i + 1 == curves.size() ? "large_r_proxy" : "";
        const std::string p = format_number(c.parameter);
        const std::string bs = format_number(c.b_star);
        for (std::size_t k = 0; k < x_grid.size(); ++k) {
            t.rows.push_back({p, bs, format_number(x_grid[k]), format_number(c.values[k]), "0", label});
        }
        t.rows.push_back({p, bs, bs, format_number(c.value_at_b_star), "1", label});
    }
    return t;
}

MonotoneCheck check_sweep(SweepParameter parameter, const std::vector<SweepCurve>& curves, double tolerance) {
    MonotoneCheck out;
    // sign +1: values must not increase along the grid
    const double sign = parameter == SweepParameter::beta ? 1.0 : -1.0;
    for (std::size_t i = 1; i < curves.size(); ++i) {
        const auto& prev = curves[i - 1];
        const auto& cur = curves[i];
        for (std::size_t k = 0; k < cur.values.size(); ++k) {
            const double excess = sign * (cur.values[k] - prev.values[k]);
            if (excess > tolerance) out.value_ok = false;
            out.worst_value_violation = std::max(out.worst_value_violation, excess);
        }
        const double drop = prev.b_star - cur.b_star;
        if (drop > tolerance) out.barrier_ok = false;
        out.worst_barrier_violation = std::max(out.worst_barrier_violation, drop);
    }
    return out;
}

CsvTable vi_table(const VIReport& report) {
    CsvTable t{{"x", "region", "v", "dv", "generator", "expected", "residual", "max_closed", "max_scanned",
                "first_inequality", "ok"},
               {}};
    for (const auto& p : report.points) {
        t.rows.push_back({format_number(p.x), p.region == Region::below_barrier ? "below" : "above", format_number(p.v),
                          format_number(p.dv), format_number(p.generator), format_number(p.expected),
                          format_number(p.residual), format_number(p.max_closed), format_number(p.max_scanned),
                          format_number(p.first_inequality), p.ok() ? "1" : "0"});
    }
    return t;
}

bool McRow::agrees() const {
    return std::abs(estimate.mean - analytic) <= std::max(3.0 * estimate.std_error, 0.01 * std::abs(analytic));
}

std::vector<McRow> mc_compare(const BarrierProblem& problem, const std::vector<double>& b_list,
                              const std::vector<double>& x_grid, const SimConfig& sim) {
    require_increasing("b", b_list);
    require_increasing("x", x_grid);
    std::vector<McRow> rows;
    for (double b : b_list) {
        const BarrierValue v(problem, b);
        for (double x : x_grid) {
            McRow row;
            row.b = b;
            row.x = x;
            row.analytic = v.value(x);
            row.estimate = estimate_value(problem, b, x, sim);
            rows.push_back(row);
        }
    }
    return rows;
}

CsvTable mc_table(const std::vector<McRow>& rows) {
    CsvTable t{{"b", "x", "analytic", "mc_mean", "std_error", "n_paths", "truncation_bound", "dividends_npv",
                "injections_npv", "agrees"},
               {}};
    for (const auto& r : rows) {
        const auto& e = r.estimate;
        t.rows.push_back({format_number(r.b), format_number(r.x), format_number(r.analytic), format_number(e.mean),
                          format_number(e.std_error), std::to_string(e.n_paths), format_number(e.truncation_bound),
                          format_number(e.dividends_mean), format_number(e.injections_mean), r.agrees() ? "1" : "0"});
    }
    return t;
}

CsvTable bias_table(double b, double x, double analytic, const BiasProbe& probe) {
    CsvTable t{{"b", "x", "time_step", "mc_mean", "std_error", "dividends_npv", "injections_npv", "analytic"}, {}};
    for (const auto& row : probe.rows) {
        const auto& e = row.estimate;
        t.rows.push_back({format_number(b), format_number(x), format_number(row.time_step), format_number(e.mean),
                          format_number(e.std_error), format_number(e.dividends_mean), format_number(e.injections_mean),
                          format_number(analytic)});
    }
    t.rows.push_back({format_number(b), format_number(x), "0", format_number(probe.extrapolated), format_number(probe.extrapolated_std_error),
                      format_number(probe.extrapolated_dividends), format_number(probe.extrapolated_injections),
                      format_number(analytic)});
    return t;
}

}  // namespace pdiv
