#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pdiv/levy_model.hpp"

namespace pdiv {

/// y -> sum_j coef_j exp(rate_j y) + sum_k poly_k y^k on y >= 0, real part taken.
///
/// Every scale-function object in a phase-type model is of this form, and
/// so are their convolutions against each other. Working with the
/// coefficients directly lets exponentially growing terms that cancel
/// analytically be removed before evaluation.
class ExponentialSeries {
public:
    ExponentialSeries() = default;
    ExponentialSeries(std::vector<cdouble> rates, std::vector<cdouble> coefs, std::vector<double> poly = {});

    double operator()(double y) const;
    ExponentialSeries derivative() const;

    const std::vector<cdouble>& rates() const { return rates_; }
    const std::vector<cdouble>& coefs() const { return coefs_; }
    const std::vector<double>& poly() const { return poly_; }

    /// Zeroes the coefficient at `index` and returns what was removed.
    cdouble drop_term(std::size_t index);

    ExponentialSeries& operator+=(const ExponentialSeries& other);
    ExponentialSeries& operator*=(double factor);
    ExponentialSeries& operator+=(double constant);

    friend ExponentialSeries operator+(ExponentialSeries a, const ExponentialSeries& b) { return a += b; }
    friend ExponentialSeries operator-(ExponentialSeries a, ExponentialSeries b) { return a += (b *= -1.0); }
    friend ExponentialSeries operator*(double k, ExponentialSeries a) { return a *= k; }
    friend ExponentialSeries operator+(ExponentialSeries a, double k) { return a += k; }

private:
    std::vector<cdouble> rates_;
    std::vector<cdouble> coefs_;
    std::vector<double> poly_;
};

/// Spectral form of the s-scale function of a phase-type model:
/// W^{(s)}(x) = sum_i exp(theta_i x) / psi'(theta_i) for x >= 0, where theta_i
/// runs over the roots of psi(theta) = s.
class ScaleEngine {
public:
    /// Throws NearMultipleRoots if two roots are closer than 1e-8 and
    /// ConvergenceFailure if a root cannot be confirmed.
    ScaleEngine(const LevyModel& model, double level);

    double level() const { return level_; }
    double phi() const { return roots_[lead_].real(); }
    std::size_t lead_index() const { return lead_; }
    const std::vector<cdouble>& roots() const { return roots_; }
    const std::vector<cdouble>& weights() const { return weights_; }
    const LevyModel& model() const { return model_; }
    Variation variation() const { return variation_; }
    double psi_prime_at_zero() const { return psi_prime0_; }

    double W(double x) const;
    double W_prime_right(double x) const;
    double W_bar(double x) const;
    double W_bar_bar(double x) const;
    double Z(double x) const;
    double Z_bar(double x) const;

    // Closed forms valid on x >= 0 with the constant terms resolved through
    // the partial-fraction identities sum w/theta = 1/s, sum w/theta^2 = psi'(0)/s^2.
    ExponentialSeries W_series() const;
    ExponentialSeries W_bar_series() const;
    ExponentialSeries W_bar_bar_series() const;
    ExponentialSeries Z_series() const;
    /// Z_bar + psi'(0)/s.
    ExponentialSeries Z_bar_shifted_series() const;

    /// Human-readable dump of roots and weights.
    std::string dump() const;

private:
    double lead_sum(const std::vector<cdouble>& coefs, double x) const;

    LevyModel model_;
    double level_;
    Variation variation_;
    double psi_prime0_;
    std::vector<cdouble> roots_;
    std::vector<cdouble> weights_;
    std::size_t lead_ = 0;
};

ScaleEngine build_engine(const LevyModel& model, double s);

/// The engines at levels q and q + r, with the bivariate Z^{(q)}(x, Phi(q+r))
/// and the shifted convolutions W/Z/Zbar^{(q,r)}_{-b}.
class ScalePair {
public:
    ScalePair(const LevyModel& model, double q, double r);

    const ScaleEngine& q_engine() const { return engine_q_; }
    const ScaleEngine& qr_engine() const { return engine_qr_; }
    double q() const { return engine_q_.level(); }
    double r() const { return r_; }
    double phi_qr() const { return engine_qr_.phi(); }

    /// Z^{(q)}(x, Phi(q+r)) = r int_0^inf e^{-Phi(q+r) z} W^{(q)}(z + x) dz.
    double Z_biv(double x) const;
    /// Same function through e^{Phi(q+r) x}(1 - r int_0^x e^{-Phi(q+r) z} W^{(q)}(z) dz).
    double Z_biv_integral_form(double x) const;
    double Z_biv_prime(double x) const;

    double conv_W(double b, double y) const;
    double conv_Z(double b, double y) const;
    double conv_Zbar(double b, double y) const;

    /// The y >= 0 branches above as series over the level-(q+r) roots.
    ExponentialSeries conv_W_series(double b) const;
    ExponentialSeries conv_Z_series(double b) const;
    ExponentialSeries conv_Zbar_series(double b) const;

    /// y -> f(y + b) + r int_0^y W^{(q+r)}(u) f(y - u + b) du for f = sum_i a_i e^{theta_i x},
    /// given shifted[i] = a_i e^{theta_i b}. Taking the shifted form lets callers
    /// supply a lead coefficient whose e^{Phi(q) b} growth was cancelled analytically.
    ExponentialSeries convolve_shifted(const std::vector<cdouble>& shifted) const;

private:
    ExponentialSeries convolve(const std::vector<cdouble>& a, double b) const;

    ScaleEngine engine_q_;
    ScaleEngine engine_qr_;
    double r_;
};

}  // namespace pdiv
