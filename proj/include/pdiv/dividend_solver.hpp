#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pdiv/levy_model.hpp"
#include "pdiv/scale_functions.hpp"

namespace pdiv {

/// Bail-out periodic-dividend problem: discount q, dividend-opportunity
/// rate r, unit cost beta of injected capital.
class BarrierProblem {
public:
    BarrierProblem(const LevyModel& model, double q, double r, double beta);

    const LevyModel& model() const { return pair_.q_engine().model(); }
    double q() const { return q_; }
    double r() const { return r_; }
    double beta() const { return beta_; }
    const ScalePair& pair() const { return pair_; }
    const ScaleEngine& scale_q() const { return pair_.q_engine(); }
    const ScaleEngine& scale_qr() const { return pair_.qr_engine(); }
    const ModelDiagnostics& diagnostics() const { return diag_; }
    double phi_q() const { return pair_.q_engine().phi(); }
    double phi_qr() const { return pair_.phi_qr(); }

private:
    double q_;
    double r_;
    double beta_;
    ModelDiagnostics diag_;
    ScalePair pair_;
};

struct BarrierSolution {
    double b_star = 0.0;
    double C_at_b_star = 0.0;
    double g_at_zero = 0.0;
    bool converged = false;
};

/// g(b) = Z'(b, Phi(q+r)) / (Phi(q+r) Z(b, Phi(q+r))) (beta Z(b) - 1) - beta q W(b) / Phi(q+r).
double g(const BarrierProblem& problem, double b);

/// g through the first-passage transform E_0[e^{-q tau}] of the Parisian-reflected process.
/// Throws DegenerateDenominator when Z(b) - E_0[...] vanishes (b = 0 with W(0) = 0).
double g_probabilistic(const BarrierProblem& problem, double b);

/// b* = inf{b >= 0 : g(b) <= 0}, by bracketing and bisection.
BarrierSolution optimal_barrier(const BarrierProblem& problem);

double C(const BarrierProblem& problem, double b);

/// v_b and its ingredients for one barrier. Construction resolves C_b and the
/// y = x - b >= 0 branches as exponential series over the level-(q+r) roots,
/// with the e^{Phi(q+r) y} term removed (its coefficient vanishes analytically).
class BarrierValue {
public:
    BarrierValue(const BarrierProblem& problem, double b);

    double barrier() const { return b_; }
    double C() const { return C_; }

    double value(double x) const;
    double derivative(double x) const;
    /// Right second derivative; x in {0, b} yields the right limit.
    double second_derivative_right(double x) const;
    /// E_{x-b}[exp(-q tau^-_{-b}(r))].
    double ruin_transform(double x) const;

    /// Removed e^{Phi(q+r) y} coefficients relative to the size of their parts.
    double cancellation_residual() const { return cancellation_residual_; }

private:
    /// k-th derivative of sum_i a_i e^{theta_i x} over the level-q roots, x <= b.
    double lower_sum(const std::vector<cdouble>& a, double x, int order) const;

    const BarrierProblem* problem_;
    double b_;
    double C_;
    // Below b both functions are pure sums over the level-q roots. The lead
    // entry is stored times e^{Phi(q) b}: its coefficient is a small difference
    // that is formed analytically, so large barriers stay accurate.
    std::vector<cdouble> v_lower_;
    std::vector<cdouble> ruin_lower_;
    ExponentialSeries v_upper_;
    ExponentialSeries dv_upper_;
    ExponentialSeries d2v_upper_;
    ExponentialSeries ruin_upper_;
    double cancellation_residual_ = 0.0;
};

double value(const BarrierProblem& problem, double b, double x);
double derivative(const BarrierProblem& problem, double b, double x);
double second_derivative_right(const BarrierProblem& problem, double b, double x);
double ruin_transform(const BarrierProblem& problem, double b, double x);

/// f with its first two derivatives; d2 may be empty for bounded variation.
struct SmoothFunction {
    std::function<double(double)> value;
    std::function<double(double)> d1;
    std::function<double(double)> d2;
};

struct GeneratorOptions {
    double tolerance = 1e-8;
    /// Extra points in the jump variable z where f(x - z) has a kink.
    std::vector<double> breakpoints;
};

/// (L f)(x) = c f'(x) + sigma^2/2 f''(x) + lambda int_0^inf (f(x - z) - f(x)) dF_Z(z),
/// with the jump integral by adaptive Gauss-Kronrod split at z = x.
/// Throws QuadratureFailure if the error estimate exceeds the tolerance.
double generator_apply(const LevyModel& model, const SmoothFunction& f, double x,
                       const GeneratorOptions& options = {});

enum class Region { below_barrier, above_barrier };

struct VIPoint {
    double x = 0.0;
    Region region = Region::below_barrier;
    double v = 0.0;
    double dv = 0.0;
    double generator = 0.0;    // (L - q) v(x)
    double expected = 0.0;     // 0 below, -r(x - b + v(b) - v(x)) above
    double residual = 0.0;     // generator - expected
    double max_closed = 0.0;   // closed-form max_{0<=l<=x}{l + v(x-l) - v(x)}
    double max_scanned = 0.0;  // same max by direct scan
    double first_inequality = 0.0;  // (L - q) v + r max_scanned, must be <= 0
    bool generator_ok = true;
    bool argmax_ok = true;
    bool slope_ok = true;      // v' <= beta
    bool bounds_ok = true;     // 1 <= v' <= beta below, 0 <= v' <= 1 above
    bool ok() const { return generator_ok && argmax_ok && slope_ok && bounds_ok && first_inequality <= tol_first; }
    double tol_first = 0.0;
};

struct VIOptions {
    double residual_tolerance = 1e-4;  // scaled by (1 + |v|)
    double quadrature_tolerance = 1e-6;
    double slope_tolerance = 1e-9;
    double max_tolerance = 1e-7;
};

struct VIReport {
    double barrier = 0.0;
    double v_at_zero = 0.0;  // witnesses inf v > -infinity
    std::vector<VIPoint> points;
    bool passed() const;
    /// Throws ViolationFound naming the first failing x.
    void require() const;
};

/// 400 log-spaced points on (1e-4, b - 1e-4) and (b + 1e-4, upper), split evenly.
std::vector<double> vi_grid(double barrier, std::size_t n_points = 400, double upper = 20.0);

VIReport vi_check(const BarrierProblem& problem, const BarrierSolution& solution, std::span<const double> x_grid,
                  const VIOptions& options = {});

struct DominanceRow {
    double b = 0.0;
    double x = 0.0;
    double v_b = 0.0;
    double v_b_star = 0.0;
    bool dominated = true;
};

std::vector<DominanceRow> dominance_scan(const BarrierProblem& problem, const BarrierSolution& solution,
                                         std::span<const double> b_list, std::span<const double> x_grid,
                                         double tolerance = 1e-9);

}  // namespace pdiv
