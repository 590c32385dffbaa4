#include "pdiv/dividend_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "pdiv/error.hpp"

namespace pdiv {

BarrierProblem::BarrierProblem(const LevyModel& model, double q, double r, double beta)
    : q_(q), r_(r), beta_(beta), diag_(validate_model(model)), pair_(model, q, r) {
    if (!(q > 0.0) || !std::isfinite(q)) throw Error(ErrorCode::InvalidArgument, "q must be > 0");
    if (!(r > 0.0) || !std::isfinite(r)) throw Error(ErrorCode::InvalidArgument, "r must be > 0");
    if (!(beta > 1.0) || !std::isfinite(beta)) throw Error(ErrorCode::InvalidArgument, "beta must be > 1");
}

namespace {

void require_barrier(double b) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw Error(ErrorCode::InvalidArgument, "barrier must be finite and >= 0");
}

}  // namespace

namespace {

// Pieces at barrier b with the e^{Phi(q) b} growth divided out, written
// over the level-q roots theta_i with weights w_i.
struct Scaled {
    double zbiv = 0.0;        // Z(b, Phi(q+r)) e^{-Phi(q) b}
    double zbiv_prime = 0.0;  // Z'(b, Phi(q+r)) e^{-Phi(q) b}
    // beta/Phi(q) - C_b, times Z(b, Phi(q+r)) q Phi(q) Phi(q+r). The e^{Phi(q) b} parts cancel.
    double c_gap_num = 0.0;
    // Z'(b, .) - Phi(q) Z(b, .), whose lead term also cancels.
    double slope_gap = 0.0;
};

Scaled scaled(const BarrierProblem& p, double b) {
    const auto& th = p.scale_q().roots();
    const auto& w = p.scale_q().weights();
    const std::size_t lead = p.scale_q().lead_index();
    const double phi1 = p.phi_q();
    const double phi2 = p.phi_qr();
    const double q = p.q();
    const double r = p.r();
    cdouble zb = 0.0, zp = 0.0, num = 0.0, gap = 0.0;
    for (std::size_t i = 0; i < th.size(); ++i) {
        const cdouble decay = std::exp((th[i] - phi1) * b);
        zb += w[i] * decay / (phi2 - th[i]);
        zp += w[i] * th[i] * decay / (phi2 - th[i]);
        if (i == lead) continue;
        const cdouble e = std::exp(th[i] * b);
        num += w[i] * e * ((phi2 - phi1) / (phi2 - th[i]) - phi1 / th[i]);
        gap += w[i] * e * (th[i] - phi1) / (phi2 - th[i]);
    }
    Scaled out;
    out.zbiv = r * zb.real();
    out.zbiv_prime = r * zp.real();
    out.c_gap_num = r * phi1 + p.beta() * q * r * num.real();
    out.slope_gap = r * gap.real();
    return out;
}

}  // namespace

double g(const BarrierProblem& problem, double b) {
    require_barrier(b);
    // Multiplying out, the e^{2 Phi(q) b} terms cancel pairwise and what is left is
    // beta r q Phi2 sum_{i<j} w_i w_j e^{(theta_i + theta_j) b} (theta_i - theta_j)^2
    //   / (theta_i theta_j (Phi2 - theta_i)(Phi2 - theta_j)) - Z'(b, Phi2),
    // over Phi2 Z(b, Phi2).
    const auto& th = problem.scale_q().roots();
    const auto& w = problem.scale_q().weights();
    const double phi1 = problem.phi_q();
    const double phi2 = problem.phi_qr();
    cdouble cross = 0.0;
    for (std::size_t i = 0; i < th.size(); ++i) {
        for (std::size_t j = i + 1; j < th.size(); ++j) {
            const cdouble d = th[i] - th[j];
            cross += w[i] * w[j] * std::exp((th[i] + th[j] - phi1) * b) * d * d /
                     (th[i] * th[j] * (phi2 - th[i]) * (phi2 - th[j]));
        }
    }
    const Scaled s = scaled(problem, b);
    const double num = problem.beta() * problem.r() * problem.q() * phi2 * cross.real() - s.zbiv_prime;
    return num / (phi2 * s.zbiv);
}

double g_probabilistic(const BarrierProblem& problem, double b) {
    require_barrier(b);
    const auto& scale = problem.scale_q();
    const double passage = BarrierValue(problem, b).ruin_transform(b);
    const double z = scale.Z(b);
    const double denominator = z - passage;
    if (!(std::abs(denominator) > 1e-13 * z)) {
        throw Error(ErrorCode::DegenerateDenominator,
                    fmt::format("Z(b) - E_0[e^(-q tau)] = {:.3e} at b = {}", denominator, b));
    }
    return problem.q() / problem.phi_qr() * (problem.beta() * passage - 1.0) / denominator * scale.W(b);
}

double C(const BarrierProblem& problem, double b) {
    require_barrier(b);
    // r (beta Z(b) - 1) / (q Phi2 Z(b, Phi2)) + beta / Phi2, rearranged around its b -> inf limit beta / Phi(q).
    const Scaled s = scaled(problem, b);
    const double phi1 = problem.phi_q();
    const double gap = s.c_gap_num * std::exp(-phi1 * b) / (problem.q() * phi1 * problem.phi_qr() * s.zbiv);
    return problem.beta() / phi1 - gap;
}

BarrierSolution optimal_barrier(const BarrierProblem& problem) {
    BarrierSolution out;
    out.g_at_zero = g(problem, 0.0);
    if (out.g_at_zero <= 0.0) {
        out.b_star = 0.0;
        out.C_at_b_star = (problem.r() * (problem.beta() - 1.0) + problem.q() * problem.beta()) /
                          (problem.q() * problem.phi_qr());
        out.converged = true;
        return out;
    }

    double lo = 0.0;
    double hi = 1.0;
    for (;;) {
        const double value = g(problem, hi);
        if (!std::isfinite(value)) {
            throw Error(ErrorCode::BracketFailure, fmt::format("g is not finite at b = {}", hi));
        }
        if (value <= 0.0) break;
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw Error(ErrorCode::BracketFailure, "no sign change of g below b = 1e6");
    }
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (g(problem, mid) > 0.0 ? lo : hi) = mid;
    }

    out.b_star = hi;
    const double residual = g(problem, hi);
    out.converged = std::abs(residual) <= 1e-10;
    const auto& scale = problem.scale_q();
    out.C_at_b_star = (problem.beta() * scale.Z(hi) - 1.0) / (problem.q() * scale.W(hi));
    return out;
}

// ---------------------------------------------------------------------------
// BarrierValue

BarrierValue::BarrierValue(const BarrierProblem& problem, double b) : problem_(&problem), b_(b) {
    require_barrier(b);
    C_ = pdiv::C(problem, b);

    const auto& scale_q = problem.scale_q();
    const auto& scale_qr = problem.scale_qr();
    const auto& pair = problem.pair();
    const auto& th = scale_q.roots();
    const auto& w = scale_q.weights();
    const std::size_t lead = scale_q.lead_index();
    const double q = problem.q();
    const double r = problem.r();
    const double beta = problem.beta();
    const double phi1 = problem.phi_q();
    const Scaled s = scaled(problem, b);

    // v_b = -C Z + beta (Zbar + psi'(0)/q) = sum_i q w_i (beta/theta_i - C)/theta_i e^{theta_i x}, and
    // E = Z - q (Z(b,.)/Z'(b,.)) W = sum_i q w_i (1/theta_i - Z(b,.)/Z'(b,.)) e^{theta_i x}.
    const double ratio = s.zbiv / s.zbiv_prime;
    v_lower_.resize(th.size());
    ruin_lower_.resize(th.size());
    for (std::size_t i = 0; i < th.size(); ++i) {
        v_lower_[i] = q * w[i] * (beta / th[i] - C_) / th[i];
        ruin_lower_[i] = q * w[i] * (1.0 / th[i] - ratio);
    }
    v_lower_[lead] = w[lead] * s.c_gap_num / (phi1 * phi1 * problem.phi_qr() * s.zbiv);
    ruin_lower_[lead] = q * w[lead] * s.slope_gap / (phi1 * s.zbiv_prime);

    auto shifted = [&](const std::vector<cdouble>& a) {
        std::vector<cdouble> out(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = i == lead ? a[i] : a[i] * std::exp(th[i] * b);
        return out;
    };

    // y = x - b >= 0: f(y + b) + r (W^{(q+r)} * f)(y + b) - r f(b) Wbar^{(q+r)}(y), and v has -r Wbarbar^{(q+r)} on top.
    const ExponentialSeries wbar2 = scale_qr.W_bar_series();
    const ExponentialSeries wbarbar2 = scale_qr.W_bar_bar_series();
    const ExponentialSeries conv_v = pair.convolve_shifted(shifted(v_lower_));
    const ExponentialSeries conv_e = pair.convolve_shifted(shifted(ruin_lower_));
    const double v_b = lower_sum(v_lower_, b, 0);
    const double e_b = lower_sum(ruin_lower_, b, 0);

    const std::size_t lead2 = scale_qr.lead_index();
    v_upper_ = conv_v - (r * v_b) * wbar2 - r * wbarbar2;
    const double parts = std::abs(conv_v.coefs()[lead2]) + std::abs(r * v_b * wbar2.coefs()[lead2]) +
                         std::abs(r * wbarbar2.coefs()[lead2]);
    const cdouble removed_v = v_upper_.drop_term(lead2);
    dv_upper_ = v_upper_.derivative();
    d2v_upper_ = dv_upper_.derivative();

    ruin_upper_ = conv_e - (r * e_b) * wbar2;
    const double ruin_parts = std::abs(conv_e.coefs()[lead2]) + std::abs(r * e_b * wbar2.coefs()[lead2]);
    const cdouble removed_ruin = ruin_upper_.drop_term(lead2);

    cancellation_residual_ = std::max(parts > 0.0 ? std::abs(removed_v) / parts : 0.0,
                                      ruin_parts > 0.0 ? std::abs(removed_ruin) / ruin_parts : 0.0);
}

double BarrierValue::lower_sum(const std::vector<cdouble>& a, double x, int order) const {
    const auto& th = problem_->scale_q().roots();
    const std::size_t lead = problem_->scale_q().lead_index();
    double acc = 0.0;
    for (std::size_t i = 0; i < th.size(); ++i) {
        const cdouble e = i == lead ? std::exp(th[i] * (x - b_)) : std::exp(th[i] * x);
        acc += (a[i] * std::pow(th[i], order) * e).real();
    }
    return acc;
}

double BarrierValue::value(double x) const {
    if (x < 0.0) return problem_->beta() * x + lower_sum(v_lower_, 0.0, 0);
    if (x <= b_) return lower_sum(v_lower_, x, 0);
    return v_upper_(x - b_);
}

double BarrierValue::derivative(double x) const {
    if (x < 0.0) return problem_->beta();
    if (x <= b_) return lower_sum(v_lower_, x, 1);
    return dv_upper_(x - b_);
}

double BarrierValue::second_derivative_right(double x) const {
    if (x < 0.0) return 0.0;
    if (x < b_) return lower_sum(v_lower_, x, 2);
    return d2v_upper_(x - b_);
}

double BarrierValue::ruin_transform(double x) const {
    if (x < 0.0) return 1.0;
    if (x < b_) return lower_sum(ruin_lower_, x, 0);
    return ruin_upper_(x - b_);
}

double value(const BarrierProblem& problem, double b, double x) { return BarrierValue(problem, b).value(x); }

double derivative(const BarrierProblem& problem, double b, double x) {
    return BarrierValue(problem, b).derivative(x);
}

double second_derivative_right(const BarrierProblem& problem, double b, double x) {
    return BarrierValue(problem, b).second_derivative_right(x);
}

double ruin_transform(const BarrierProblem& problem, double b, double x) {
    return BarrierValue(problem, b).ruin_transform(x);
}

// ---------------------------------------------------------------------------
// Generator

double generator_apply(const LevyModel& model, const SmoothFunction& f, double x, const GeneratorOptions& options) {
    if (!(x > 0.0)) throw Error(ErrorCode::InvalidArgument, "generator_apply needs x > 0");
    double out = model.drift_c * f.d1(x);
    if (model.sigma > 0.0) {
        if (!f.d2) throw Error(ErrorCode::InvalidArgument, "unbounded variation needs the second derivative");
        out += 0.5 * model.sigma * model.sigma * f.d2(x);
    }
    if (!model.has_jumps()) return out;

    std::vector<double> cuts{0.0};
    for (double z : options.breakpoints) {
        if (z > 0.0 && z < x) cuts.push_back(z);
    }
    cuts.push_back(x);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    cuts.push_back(std::numeric_limits<double>::infinity());

    const auto& dist = model.jump_dist;
    const double fx = f.value(x);
    auto integrand = [&](double z) { return (f.value(x - z) - fx) * dist.density(z); };

    using Quadrature = boost::math::quadrature::gauss_kronrod<double, 31>;
    double integral = 0.0;
    double error = 0.0;
    double magnitude = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        double seg_error = 0.0;
        double seg_l1 = 0.0;
        integral += Quadrature::integrate(integrand, cuts[k], cuts[k + 1], 20, options.tolerance * 0.1, &seg_error,
                                          &seg_l1);
        error += seg_error;
        magnitude += seg_l1;
    }
    if (!(error <= options.tolerance * std::max(1.0, magnitude))) {
        throw Error(ErrorCode::QuadratureFailure,
                    fmt::format("jump integral at x = {} has error estimate {:.3e}", x, error));
    }
    return out + model.jump_rate * integral;
}

// ---------------------------------------------------------------------------
// Variational inequalities

bool VIReport::passed() const {
    return std::all_of(points.begin(), points.end(), [](const VIPoint& p) { return p.ok(); });
}

void VIReport::require() const {
    for (const auto& p : points) {
        if (!p.ok()) {
            throw Error(ErrorCode::ViolationFound,
                        fmt::format("x = {:.6g}: residual {:.3e}, first inequality {:.3e}, v' = {:.12g}", p.x,
                                    p.residual, p.first_inequality, p.dv));
        }
    }
}

namespace {

std::vector<double> geomspace(double lo, double hi, std::size_t n) {
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    const double step = std::log(hi / lo) / static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k) out[k] = lo * std::exp(step * static_cast<double>(k));
    out.back() = hi;
    return out;
}

}  // namespace

std::vector<double> vi_grid(double barrier, std::size_t n_points, double upper) {
    constexpr double gap = 1e-4;
    upper = std::max(upper, 2.0 * barrier + 1.0);
    std::vector<double> grid;
    if (barrier > 2.0 * gap) {
        const std::size_t left = n_points / 2;
        grid = geomspace(gap, barrier - gap, left);
        for (double d : geomspace(gap, upper - barrier, n_points - left)) grid.push_back(barrier + d);
    } else {
        for (double d : geomspace(gap, upper - barrier, n_points)) grid.push_back(barrier + d);
    }
    return grid;
}

VIReport vi_check(const BarrierProblem& problem, const BarrierSolution& solution, std::span<const double> x_grid,
                  const VIOptions& options) {
    const double b = solution.b_star;
    const BarrierValue bv(problem, b);
    const double q = problem.q();
    const double r = problem.r();
    const double beta = problem.beta();

    VIReport report;
    report.barrier = b;
    report.v_at_zero = bv.value(0.0);
    if (x_grid.empty()) return report;

    // h(u) = v(u) - u; max_{0<=l<=x}{l + v(x-l) - v(x)} = max_{u in [0,x]} h(u) - h(x).
    const double x_max = *std::max_element(x_grid.begin(), x_grid.end());
    constexpr std::size_t dense_n = 20000;
    std::vector<double> dense_u(dense_n + 1);
    std::vector<double> dense_h(dense_n + 1);
    for (std::size_t k = 0; k <= dense_n; ++k) {
        dense_u[k] = x_max * static_cast<double>(k) / dense_n;
        dense_h[k] = bv.value(dense_u[k]) - dense_u[k];
    }
    auto h = [&](double u) { return bv.value(u) - u; };
    auto scanned_max = [&](double x) {
        double best_u = 0.0;
        double best = h(0.0);
        for (std::size_t k = 0; k <= dense_n && dense_u[k] <= x; ++k) {
            if (dense_h[k] > best) {
                best = dense_h[k];
                best_u = dense_u[k];
            }
        }
        const double hx = h(x);
        if (hx > best) {
            best = hx;
            best_u = x;
        }
        if (b > 0.0 && b <= x && h(b) > best) {
            best = h(b);
            best_u = b;
        }
        // Golden-section refinement around the best grid point.
        const double cell = x_max / dense_n;
        double lo = std::max(0.0, best_u - cell);
        double hi = std::min(x, best_u + cell);
        constexpr double ratio = 0.6180339887498949;
        for (int it = 0; it < 40 && hi - lo > 1e-12; ++it) {
            const double m1 = hi - ratio * (hi - lo);
            const double m2 = lo + ratio * (hi - lo);
            if (h(m1) < h(m2)) lo = m1; else hi = m2;
        }
        best = std::max(best, h(0.5 * (lo + hi)));
        return best - hx;
    };

    const SmoothFunction f{[&](double u) { return bv.value(u); }, [&](double u) { return bv.derivative(u); },
                           [&](double u) { return bv.second_derivative_right(u); }};
    const double v_b = bv.value(b);

    report.points.reserve(x_grid.size());
    for (double x : x_grid) {
        VIPoint p;
        p.x = x;
        p.region = x <= b ? Region::below_barrier : Region::above_barrier;
        p.v = bv.value(x);
        p.dv = bv.derivative(x);
        GeneratorOptions gen;
        gen.tolerance = options.quadrature_tolerance;
        if (x > b) gen.breakpoints.push_back(x - b);
        p.generator = generator_apply(problem.model(), f, x, gen) - q * p.v;
        p.expected = p.region == Region::below_barrier ? 0.0 : -r * (x - b + v_b - p.v);
        p.residual = p.generator - p.expected;
        const double scale = 1.0 + std::abs(p.v);
        p.generator_ok = std::abs(p.residual) <= options.residual_tolerance * scale;

        p.max_closed = p.region == Region::below_barrier ? 0.0 : x - b + v_b - p.v;
        p.max_scanned = std::max(scanned_max(x), p.max_closed);
        p.argmax_ok = p.max_scanned - p.max_closed <= options.max_tolerance * scale;
        p.first_inequality = p.generator + r * p.max_scanned;
        p.tol_first = options.residual_tolerance * scale;

        const double tol = options.slope_tolerance;
        p.slope_ok = p.dv <= beta + tol;
        p.bounds_ok = p.region == Region::below_barrier ? (p.dv >= 1.0 - tol && p.dv <= beta + tol)
                                                        : (p.dv >= -tol && p.dv <= 1.0 + tol);
        report.points.push_back(p);
    }
    return report;
}

std::vector<DominanceRow> dominance_scan(const BarrierProblem& problem, const BarrierSolution& solution,
                                         std::span<const double> b_list, std::span<const double> x_grid,
                                         double tolerance) {
    const BarrierValue best(problem, solution.b_star);
    std::vector<DominanceRow> rows;
    rows.reserve(b_list.size() * x_grid.size());
    for (double b : b_list) {
        const BarrierValue other(problem, b);
        for (double x : x_grid) {
            DominanceRow row{b, x, other.value(x), best.value(x), true};
            row.dominated = row.v_b_star >= row.v_b - tolerance;
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace pdiv
