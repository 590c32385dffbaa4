#pragma once

#include <complex>

#include <Eigen/Dense>

namespace pdiv {

using cdouble = std::complex<double>;

/// Law of the absorption time of a finite Markov chain with transient
/// generator `subgenerator` started from `initial_law`.
struct PhaseTypeDistribution {
    Eigen::VectorXd initial_law;
    Eigen::MatrixXd subgenerator;

    int num_phases() const { return static_cast<int>(initial_law.size()); }

    /// t = -T 1, the absorption rate out of each phase.
    Eigen::VectorXd exit_vector() const;

    double mean() const;

    /// Density alpha exp(T z) t for z >= 0, zero for z < 0.
    double density(double z) const;

    /// E[exp(-theta Z)] = alpha (theta I - T)^{-1} t and its theta-derivative.
    /// Throws SingularResolvent when theta sits on an eigenvalue of T.
    cdouble laplace(cdouble theta) const;
    cdouble laplace_derivative(cdouble theta) const;

    /// Throws InvalidPhaseType if any structural invariant fails.
    void validate() const;
};

/// X(t) = c t + sigma B(t) - sum_{n <= N(t)} Z_n with N Poisson(jump_rate)
/// and Z_n ~ jump_dist.
struct LevyModel {
    double drift_c = 0.0;
    double sigma = 0.0;
    double jump_rate = 0.0;
    PhaseTypeDistribution jump_dist;

    bool has_jumps() const { return jump_rate > 0.0 && jump_dist.num_phases() > 0; }
};

enum class Variation { bounded, unbounded };

struct ModelDiagnostics {
    Variation variation_kind = Variation::bounded;
    double psi_prime_at_zero = 0.0;
    double mean_jump = 0.0;
};

const char* to_string(Variation v) noexcept;

ModelDiagnostics validate_model(const LevyModel& model);

/// psi(theta) = c theta + sigma^2 theta^2 / 2 + lambda (E[e^{-theta Z}] - 1).
double laplace_exponent(const LevyModel& model, double theta);
cdouble laplace_exponent(const LevyModel& model, cdouble theta);
cdouble laplace_exponent_derivative(const LevyModel& model, cdouble theta);

/// psi'(0+) = c - lambda E[Z].
double psi_prime_at_zero(const LevyModel& model);

/// Largest root of psi(theta) = s, for s > 0.
double phi(const LevyModel& model, double s);

}  // namespace pdiv
