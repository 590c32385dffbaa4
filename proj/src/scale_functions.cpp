#include "pdiv/scale_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "pdiv/error.hpp"

namespace pdiv {

namespace {

/// exp(z) - 1 without cancellation for small |z|.
cdouble cexpm1(cdouble z) {
    const double x = z.real();
    const double y = z.imag();
    const double half_sin = std::sin(0.5 * y);
    return {std::expm1(x) * std::cos(y) - 2.0 * half_sin * half_sin, std::exp(x) * std::sin(y)};
}

/// (e^z - 1) / z
cdouble exprel1(cdouble z) {
    if (std::abs(z) < 1e-8) return 1.0 + 0.5 * z;
    return cexpm1(z) / z;
}

/// (e^z - 1 - z) / z^2
cdouble exprel2(cdouble z) {
    if (std::abs(z) < 0.5) {
        cdouble term = 0.5;
        cdouble sum = term;
        for (int k = 3; k < 24; ++k) {
            term *= z / static_cast<double>(k);
            sum += term;
        }
        return sum;
    }
    return (cexpm1(z) - z) / (z * z);
}

double polyval(const std::vector<double>& poly, double y) {
    double acc = 0.0;
    for (auto it = poly.rbegin(); it != poly.rend(); ++it) acc = acc * y + *it;
    return acc;
}

/// Companion-style linearisation whose eigenvalues are the roots of psi(theta) = s.
Eigen::MatrixXd linearisation(const LevyModel& model, double s) {
    const int m = model.has_jumps() ? model.jump_dist.num_phases() : 0;
    const double lambda = model.has_jumps() ? model.jump_rate : 0.0;
    const bool brownian = model.sigma > 0.0;
    const int head = brownian ? 2 : 1;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(head + m, head + m);

    // State (y, [theta y], v) with v = (theta I - T)^{-1} t y, so alpha v = L_Z(theta) y.
    if (brownian) {
        const double k = 2.0 / (model.sigma * model.sigma);
        a(0, 1) = 1.0;
        a(1, 0) = k * (lambda + s);
        a(1, 1) = -k * model.drift_c;
        for (int j = 0; j < m; ++j) a(1, head + j) = -k * lambda * model.jump_dist.initial_law(j);
    } else {
        const double k = 1.0 / model.drift_c;
        a(0, 0) = k * (lambda + s);
        for (int j = 0; j < m; ++j) a(0, head + j) = -k * lambda * model.jump_dist.initial_law(j);
    }
    if (m > 0) {
        a.block(head, head, m, m) = model.jump_dist.subgenerator;
        a.block(head, 0, m, 1) = model.jump_dist.exit_vector();
    }
    return a;
}

}  // namespace

// ---------------------------------------------------------------------------
// ExponentialSeries

ExponentialSeries::ExponentialSeries(std::vector<cdouble> rates, std::vector<cdouble> coefs, std::vector<double> poly)
    : rates_(std::move(rates)), coefs_(std::move(coefs)), poly_(std::move(poly)) {
    if (rates_.size() != coefs_.size()) {
        throw Error(ErrorCode::InvalidArgument, "ExponentialSeries: rates and coefficients differ in length");
    }
}

double ExponentialSeries::operator()(double y) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < rates_.size(); ++j) {
        if (coefs_[j] == cdouble(0.0)) continue;
        acc += (coefs_[j] * std::exp(rates_[j] * y)).real();
    }
    return acc + polyval(poly_, y);
}

ExponentialSeries ExponentialSeries::derivative() const {
    std::vector<cdouble> coefs(coefs_.size());
    for (std::size_t j = 0; j < coefs_.size(); ++j) coefs[j] = coefs_[j] * rates_[j];
    std::vector<double> poly;
    for (std::size_t k = 1; k < poly_.size(); ++k) poly.push_back(static_cast<double>(k) * poly_[k]);
    return {rates_, std::move(coefs), std::move(poly)};
}

cdouble ExponentialSeries::drop_term(std::size_t index) {
    const cdouble removed = coefs_.at(index);
    coefs_[index] = 0.0;
    return removed;
}

ExponentialSeries& ExponentialSeries::operator+=(const ExponentialSeries& other) {
    if (rates_.empty() && coefs_.empty()) {
        rates_ = other.rates_;
        coefs_.assign(other.coefs_.size(), 0.0);
    }
    if (other.rates_ != rates_) {
        throw Error(ErrorCode::InvalidArgument, "ExponentialSeries: adding series over different rates");
    }
    for (std::size_t j = 0; j < coefs_.size(); ++j) coefs_[j] += other.coefs_[j];
    if (poly_.size() < other.poly_.size()) poly_.resize(other.poly_.size(), 0.0);
    for (std::size_t k = 0; k < other.poly_.size(); ++k) poly_[k] += other.poly_[k];
    return *this;
}

ExponentialSeries& ExponentialSeries::operator*=(double factor) {
    for (auto& c : coefs_) c *= factor;
    for (auto& p : poly_) p *= factor;
    return *this;
}

ExponentialSeries& ExponentialSeries::operator+=(double constant) {
    if (poly_.empty()) poly_.push_back(0.0);
    poly_[0] += constant;
    return *this;
}

// ---------------------------------------------------------------------------
// ScaleEngine

ScaleEngine::ScaleEngine(const LevyModel& model, double level) : model_(model), level_(level) {
    if (!(level > 0.0) || !std::isfinite(level)) {
        throw Error(ErrorCode::InvalidArgument, "scale engine level must be finite and > 0");
    }
    const ModelDiagnostics diag = validate_model(model);
    variation_ = diag.variation_kind;
    psi_prime0_ = diag.psi_prime_at_zero;

    const Eigen::MatrixXd lin = linearisation(model, level);
    const Eigen::VectorXcd eig = lin.eigenvalues();
    const double lead = pdiv::phi(model, level);

    roots_.reserve(eig.size());
    for (Eigen::Index k = 0; k < eig.size(); ++k) {
        cdouble theta = eig(k);
        const double scale = 1.0 + std::abs(theta);
        if (std::abs(theta.imag()) < 1e-10 * scale) theta = theta.real();
        // Newton polish on psi itself; keep a step only if it improves the residual.
        cdouble residual = laplace_exponent(model, theta) - level;
        for (int it = 0; it < 8; ++it) {
            const cdouble step = residual / laplace_exponent_derivative(model, theta);
            if (std::abs(step) > 1e-3 * scale) break;
            cdouble next = theta - step;
            if (theta.imag() == 0.0) next = next.real();
            const cdouble next_residual = laplace_exponent(model, next) - level;
            if (std::abs(next_residual) >= std::abs(residual)) break;
            theta = next;
            residual = next_residual;
        }
        const double psi_scale = level + std::abs(model.drift_c * theta) +
                                 0.5 * model.sigma * model.sigma * std::norm(theta) + 2.0 * model.jump_rate;
        if (!(std::abs(residual) <= 1e-9 * psi_scale)) {
            throw Error(ErrorCode::ConvergenceFailure,
                        fmt::format("root ({}, {}) of psi = {} not confirmed (residual {:.3e}); "
                                    "is the phase-type representation minimal?",
                                    theta.real(), theta.imag(), level, std::abs(residual)));
        }
        roots_.push_back(theta);
    }

    // A genuine double root comes back split by ~sqrt(rounding / psi''), which can be
    // well above 1e-8. Count the pair as coincident unless its separation clears
    // 1e-8 plus that resolution limit.
    auto resolution = [&](cdouble mid) {
        const double h = 1e-4 * (1.0 + std::abs(mid));
        const double curvature =
            std::abs(laplace_exponent_derivative(model, mid + h) - laplace_exponent_derivative(model, mid - h)) /
            (2.0 * h);
        const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                             (level + std::abs(model.drift_c * mid) + 0.5 * model.sigma * model.sigma * std::norm(mid) +
                              2.0 * model.jump_rate);
        return curvature > 0.0 ? 2.0 * std::sqrt(2.0 * noise / curvature) : INFINITY;
    };
    for (std::size_t i = 0; i < roots_.size(); ++i) {
        for (std::size_t j = i + 1; j < roots_.size(); ++j) {
            const double gap = std::abs(roots_[i] - roots_[j]);
            if (gap < 1e-8 || (gap < 1e-4 && gap < 1e-8 + resolution(0.5 * (roots_[i] + roots_[j])))) {
                throw Error(ErrorCode::NearMultipleRoots,
                            fmt::format("roots {} and {} of psi = {} are within 1e-8", i, j, level));
            }
        }
    }

    lead_ = static_cast<std::size_t>(
        std::max_element(roots_.begin(), roots_.end(),
                         [](cdouble a, cdouble b) { return a.real() < b.real(); }) -
        roots_.begin());
    if (roots_[lead_].imag() != 0.0 || std::abs(roots_[lead_].real() - lead) > 1e-10 * std::max(1.0, lead)) {
        throw Error(ErrorCode::ConvergenceFailure,
                    fmt::format("dominant root ({}, {}) does not match Phi({}) = {}", roots_[lead_].real(),
                                roots_[lead_].imag(), level, lead));
    }
    roots_[lead_] = lead;
    for (std::size_t i = 0; i < roots_.size(); ++i) {
        if (i != lead_ && !(roots_[i].real() < lead)) {
            throw Error(ErrorCode::ConvergenceFailure, "a non-dominant root has real part >= Phi(s)");
        }
    }

    weights_.reserve(roots_.size());
    for (const auto& theta : roots_) weights_.push_back(1.0 / laplace_exponent_derivative(model, theta));
}

double ScaleEngine::lead_sum(const std::vector<cdouble>& coefs, double x) const {
    // Factor out e^{Phi x}: every other root has smaller real part.
    const double lead = phi();
    double acc = 0.0;
    for (std::size_t i = 0; i < roots_.size(); ++i) {
        acc += (coefs[i] * std::exp((roots_[i] - lead) * x)).real();
    }
    return acc * std::exp(lead * x);
}

double ScaleEngine::W(double x) const {
    if (x < 0.0) return 0.0;
    // exact; the spectral sum only reaches it to rounding
    if (x == 0.0 && variation_ == Variation::unbounded) return 0.0;
    return lead_sum(weights_, x);
}

double ScaleEngine::W_prime_right(double x) const {
    if (x < 0.0) return 0.0;
    std::vector<cdouble> coefs(roots_.size());
    for (std::size_t i = 0; i < roots_.size(); ++i) coefs[i] = weights_[i] * roots_[i];
    return lead_sum(coefs, x);
}

double ScaleEngine::W_bar(double x) const {
    if (x <= 0.0) return 0.0;
    cdouble acc = 0.0;
    for (std::size_t i = 0; i < roots_.size(); ++i) acc += weights_[i] * exprel1(roots_[i] * x);
    return x * acc.real();
}

double ScaleEngine::W_bar_bar(double x) const {
    if (x <= 0.0) return 0.0;
    cdouble acc = 0.0;
    for (std::size_t i = 0; i < roots_.size(); ++i) acc += weights_[i] * exprel2(roots_[i] * x);
    return x * x * acc.real();
}

double ScaleEngine::Z(double x) const { return 1.0 + level_ * W_bar(x); }

double ScaleEngine::Z_bar(double x) const { return x + level_ * W_bar_bar(x); }

ExponentialSeries ScaleEngine::W_series() const { return {roots_, weights_}; }

ExponentialSeries ScaleEngine::W_bar_series() const {
    std::vector<cdouble> coefs(roots_.size());
    for (std::size_t i = 0; i < roots_.size(); ++i) coefs[i] = weights_[i] / roots_[i];
    return {roots_, std::move(coefs), {-1.0 / level_}};
}

ExponentialSeries ScaleEngine::W_bar_bar_series() const {
    std::vector<cdouble> coefs(roots_.size());
    for (std::size_t i = 0; i < roots_.size(); ++i) coefs[i] = weights_[i] / (roots_[i] * roots_[i]);
    return {roots_, std::move(coefs), {-psi_prime0_ / (level_ * level_), -1.0 / level_}};
}

ExponentialSeries ScaleEngine::Z_series() const {
    std::vector<cdouble> coefs(roots_.size());
    for (std::size_t i = 0; i < roots_.size(); ++i) coefs[i] = level_ * weights_[i] / roots_[i];
    return {roots_, std::move(coefs)};
}

ExponentialSeries ScaleEngine::Z_bar_shifted_series() const {
    std::vector<cdouble> coefs(roots_.size());
    for (std::size_t i = 0; i < roots_.size(); ++i) coefs[i] = level_ * weights_[i] / (roots_[i] * roots_[i]);
    return {roots_, std::move(coefs)};
}

std::string ScaleEngine::dump() const {
    std::ostringstream out;
    out << fmt::format("# scale engine level={:.17g} phi={:.17g} variation={} roots={}\n", level_, phi(),
                       to_string(variation_), roots_.size());
    out << "index,root_re,root_im,weight_re,weight_im\n";
    for (std::size_t i = 0; i < roots_.size(); ++i) {
        out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", i, roots_[i].real(), roots_[i].imag(),
                           weights_[i].real(), weights_[i].imag());
    }
    return out.str();
}

ScaleEngine build_engine(const LevyModel& model, double s) { return ScaleEngine(model, s); }

// ---------------------------------------------------------------------------
// ScalePair

ScalePair::ScalePair(const LevyModel& model, double q, double r)
    : engine_q_(model, q), engine_qr_(model, q + r), r_(r) {
    if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "r must be > 0");
}

double ScalePair::Z_biv(double x) const {
    const double phi2 = phi_qr();
    if (x < 0.0) return std::exp(phi2 * x);
    const auto& roots = engine_q_.roots();
    const auto& weights = engine_q_.weights();
    const double lead = engine_q_.phi();
    double acc = 0.0;
    for (std::size_t i = 0; i < roots.size(); ++i) {
        acc += (weights[i] * std::exp((roots[i] - lead) * x) / (phi2 - roots[i])).real();
    }
    return r_ * acc * std::exp(lead * x);
}

double ScalePair::Z_biv_integral_form(double x) const {
    const double phi2 = phi_qr();
    if (x <= 0.0) return std::exp(phi2 * x);
    // int_0^x e^{-Phi2 z} e^{theta z} dz = x * exprel1((theta - Phi2) x)
    const auto& roots = engine_q_.roots();
    const auto& weights = engine_q_.weights();
    cdouble integral = 0.0;
    for (std::size_t i = 0; i < roots.size(); ++i) integral += weights[i] * x * exprel1((roots[i] - phi2) * x);
    return std::exp(phi2 * x) * (1.0 - r_ * integral.real());
}

double ScalePair::Z_biv_prime(double x) const { return phi_qr() * Z_biv(x) - r_ * engine_q_.W(x); }

ExponentialSeries ScalePair::convolve(const std::vector<cdouble>& a, double b) const {
    const auto& theta = engine_q_.roots();
    std::vector<cdouble> shifted(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) shifted[i] = a[i] * std::exp(theta[i] * b);
    return convolve_shifted(shifted);
}

ExponentialSeries ScalePair::convolve_shifted(const std::vector<cdouble>& shifted) const {
    // For y >= 0 the e^{theta_i y} terms cancel exactly because
    // sum_j omega_j / (zeta_j - theta_i) = -1 / (psi(theta_i) - q - r) = 1/r.
    const auto& theta = engine_q_.roots();
    const auto& zeta = engine_qr_.roots();
    const auto& omega = engine_qr_.weights();
    if (shifted.size() != theta.size()) throw Error(ErrorCode::InvalidArgument, "coefficient count mismatch");
    std::vector<cdouble> coefs(zeta.size());
    for (std::size_t j = 0; j < zeta.size(); ++j) {
        cdouble k = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) k += shifted[i] / (zeta[j] - theta[i]);
        coefs[j] = r_ * omega[j] * k;
    }
    return {zeta, std::move(coefs)};
}

ExponentialSeries ScalePair::conv_W_series(double b) const { return convolve(engine_q_.weights(), b); }

ExponentialSeries ScalePair::conv_Z_series(double b) const { return convolve(engine_q_.Z_series().coefs(), b); }

ExponentialSeries ScalePair::conv_Zbar_series(double b) const {
    // Zbar = (Zbar + psi'(0)/q) - psi'(0)/q; the constant convolves to K (1 + r Wbar^{(q+r)}).
    const double shift = engine_q_.psi_prime_at_zero() / q();
    ExponentialSeries out = convolve(engine_q_.Z_bar_shifted_series().coefs(), b);
    out += (-shift * r_) * engine_qr_.W_bar_series();
    out += -shift;
    return out;
}

double ScalePair::conv_W(double b, double y) const {
    if (y <= 0.0) return engine_q_.W(y + b);
    return conv_W_series(b)(y);
}

double ScalePair::conv_Z(double b, double y) const {
    if (y <= 0.0) return engine_q_.Z(y + b);
    return conv_Z_series(b)(y);
}

double ScalePair::conv_Zbar(double b, double y) const {
    if (y <= 0.0) return engine_q_.Z_bar(y + b);
    return conv_Zbar_series(b)(y);
}

}  // namespace pdiv
