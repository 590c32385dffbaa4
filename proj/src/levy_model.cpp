#include "pdiv/levy_model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "pdiv/error.hpp"

namespace pdiv {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MonotonePaths: return "MonotonePaths";
        case ErrorCode::InvalidPhaseType: return "InvalidPhaseType";
        case ErrorCode::InfiniteMean: return "InfiniteMean";
        case ErrorCode::UnsupportedModel: return "UnsupportedModel";
        case ErrorCode::SingularResolvent: return "SingularResolvent";
        case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
        case ErrorCode::NearMultipleRoots: return "NearMultipleRoots";
        case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
        case ErrorCode::BracketFailure: return "BracketFailure";
        case ErrorCode::QuadratureFailure: return "QuadratureFailure";
        case ErrorCode::ViolationFound: return "ViolationFound";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

const char* to_string(Variation v) noexcept {
    return v == Variation::bounded ? "bounded" : "unbounded";
}

Eigen::VectorXd PhaseTypeDistribution::exit_vector() const {
    return -(subgenerator * Eigen::VectorXd::Ones(num_phases()));
}

double PhaseTypeDistribution::mean() const {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(num_phases());
    const Eigen::VectorXd sojourn = (-subgenerator).partialPivLu().solve(ones);
    return initial_law.dot(sojourn);
}

double PhaseTypeDistribution::density(double z) const {
    if (z < 0.0) return 0.0;
    const Eigen::MatrixXd transient = (subgenerator * z).exp();
    return initial_law.dot(transient * exit_vector());
}

namespace {

Eigen::PartialPivLU<Eigen::MatrixXcd> resolvent_lu(const Eigen::MatrixXd& sub, cdouble theta) {
    Eigen::MatrixXcd shifted = -sub.cast<cdouble>();
    shifted.diagonal().array() += theta;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(shifted);
    if (!(lu.rcond() > 1e-14)) {
        throw Error(ErrorCode::SingularResolvent,
                    "theta = (" + std::to_string(theta.real()) + ", " +
                        std::to_string(theta.imag()) + ") is an eigenvalue of the subgenerator");
    }
    return lu;
}

}  // namespace

cdouble PhaseTypeDistribution::laplace(cdouble theta) const {
    const auto lu = resolvent_lu(subgenerator, theta);
    const Eigen::VectorXcd u = lu.solve(exit_vector().cast<cdouble>());
    return initial_law.cast<cdouble>().dot(u);
}

cdouble PhaseTypeDistribution::laplace_derivative(cdouble theta) const {
    const auto lu = resolvent_lu(subgenerator, theta);
    const Eigen::VectorXcd u = lu.solve(exit_vector().cast<cdouble>());
    const Eigen::VectorXcd v = lu.solve(u);
    // dot() conjugates its left argument; initial_law is real.
    return -initial_law.cast<cdouble>().dot(v);
}

void PhaseTypeDistribution::validate() const {
    const int m = num_phases();
    auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidPhaseType, why); };
    if (m <= 0) fail("at least one phase is required");
    if (subgenerator.rows() != m || subgenerator.cols() != m) {
        fail("subgenerator must be " + std::to_string(m) + "x" + std::to_string(m));
    }
    if (!initial_law.allFinite() || !subgenerator.allFinite()) fail("non-finite entries");
    if ((initial_law.array() < 0.0).any()) fail("initial_law has a negative entry");
    if (std::abs(initial_law.sum() - 1.0) > 1e-12) fail("initial_law does not sum to 1");

    const double scale = subgenerator.cwiseAbs().maxCoeff();
    for (int i = 0; i < m; ++i) {
        if (!(subgenerator(i, i) < 0.0)) fail("diagonal entry " + std::to_string(i) + " is not negative");
        double row = 0.0;
        for (int j = 0; j < m; ++j) {
            if (i != j && subgenerator(i, j) < 0.0) fail("negative off-diagonal entry");
            row += subgenerator(i, j);
        }
        if (row > 1e-12 * scale) fail("row " + std::to_string(i) + " has a positive sum");
    }
    if ((exit_vector().array() < -1e-12 * scale).any()) fail("exit vector has a negative entry");

    const Eigen::VectorXcd eig = subgenerator.eigenvalues();
    for (const auto& ev : eig) {
        if (!(ev.real() < 0.0)) fail("subgenerator has an eigenvalue with nonnegative real part");
    }
}

ModelDiagnostics validate_model(const LevyModel& model) {
    if (!std::isfinite(model.drift_c) || !std::isfinite(model.sigma) || !std::isfinite(model.jump_rate)) {
        throw Error(ErrorCode::InvalidArgument, "model parameters must be finite");
    }
    if (model.sigma < 0.0) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
    if (model.jump_rate < 0.0) throw Error(ErrorCode::InvalidArgument, "jump_rate must be >= 0");
    if (model.sigma == 0.0 && model.drift_c <= 0.0) {
        throw Error(ErrorCode::MonotonePaths,
                    "with sigma = 0 the drift must be positive, otherwise X has monotone paths");
    }

    ModelDiagnostics diag;
    if (model.jump_rate > 0.0) {
        model.jump_dist.validate();
        diag.mean_jump = model.jump_dist.mean();
        if (!std::isfinite(diag.mean_jump)) {
            throw Error(ErrorCode::InfiniteMean, "jump distribution has no finite mean");
        }
    }
    diag.psi_prime_at_zero = model.drift_c - model.jump_rate * diag.mean_jump;
    diag.variation_kind = model.sigma > 0.0 ? Variation::unbounded : Variation::bounded;
    return diag;
}

cdouble laplace_exponent(const LevyModel& model, cdouble theta) {
    cdouble value = model.drift_c * theta + 0.5 * model.sigma * model.sigma * theta * theta;
    if (model.has_jumps()) value += model.jump_rate * (model.jump_dist.laplace(theta) - 1.0);
    return value;
}

double laplace_exponent(const LevyModel& model, double theta) {
    double value = model.drift_c * theta + 0.5 * model.sigma * model.sigma * theta * theta;
    if (model.has_jumps()) {
        const auto& ph = model.jump_dist;
        Eigen::MatrixXd shifted = -ph.subgenerator;
        shifted.diagonal().array() += theta;
        const Eigen::VectorXd u = shifted.partialPivLu().solve(ph.exit_vector());
        value += model.jump_rate * (ph.initial_law.dot(u) - 1.0);
    }
    return value;
}

cdouble laplace_exponent_derivative(const LevyModel& model, cdouble theta) {
    cdouble value = model.drift_c + model.sigma * model.sigma * theta;
    if (model.has_jumps()) value += model.jump_rate * model.jump_dist.laplace_derivative(theta);
    return value;
}

double psi_prime_at_zero(const LevyModel& model) {
    return model.drift_c - (model.has_jumps() ? model.jump_rate * model.jump_dist.mean() : 0.0);
}

double phi(const LevyModel& model, double s) {
    if (!(s > 0.0) || !std::isfinite(s)) {
        throw Error(ErrorCode::InvalidArgument, "phi requires a finite level s > 0");
    }
    auto f = [&](double theta) { return laplace_exponent(model, theta) - s; };
    auto df = [&](double theta) { return laplace_exponent_derivative(model, cdouble(theta)).real(); };

    // psi(0) - s < 0 and psi is convex, so exactly one crossing lies in (0, inf).
    double lo = 0.0;
    double hi = 1.0;
    int doublings = 0;
    while (f(hi) <= 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++doublings > 200) throw Error(ErrorCode::ConvergenceFailure, "phi: no upper bracket");
    }

    // Newton from the right endpoint descends monotonically on a convex function;
    // the bracket guards against rounding. Iterate until the step is at rounding
    // level rather than stopping at a residual threshold.
    double theta = hi;
    for (int it = 0; it < 200; ++it) {
        const double value = f(theta);
        if (value == 0.0) return theta;
        if (value > 0.0) hi = theta; else lo = theta;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) return theta;
        const double slope = df(theta);
        double next = slope > 0.0 ? theta - value / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - theta) <= 2.0 * std::numeric_limits<double>::epsilon() * theta) {
            return std::abs(f(next)) < std::abs(value) ? next : theta;
        }
        theta = next;
    }
    throw Error(ErrorCode::ConvergenceFailure, "phi: iteration did not converge");
}

}  // namespace pdiv
