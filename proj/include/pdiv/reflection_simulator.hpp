#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <vector>

#include "pdiv/dividend_solver.hpp"

namespace pdiv {

struct SimConfig {
    double time_step = 1e-3;       // Euler step near the reflecting boundary
    std::size_t n_paths = 10000;
    double discount_cutoff = 1e-4;  // stop once e^{-q t} < cutoff
    std::uint64_t seed = 20190501;
    bool antithetic = false;        // pairs (2k, 2k+1) share a stream with mirrored draws
    unsigned workers = 0;           // 0: hardware concurrency

    /// Throws InvalidArgument unless 0 < time_step <= 1e-2 and 0 < discount_cutoff <= 1e-3.
    void validate() const;
};

/// Per-path random stream derived from (seed, stream index), independent of
/// the order in which paths are scheduled.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream, bool mirrored = false);

    double uniform();  // in (0, 1)
    double normal();
    double exponential(double rate);

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> gauss_;
    bool mirrored_;
};

/// Draws phase-type variates by running the underlying Markov chain.
class PhaseTypeSampler {
public:
    explicit PhaseTypeSampler(const PhaseTypeDistribution& dist);
    double sample(RandomStream& rng) const;

private:
    std::vector<double> initial_cdf_;
    std::vector<double> hold_rate_;
    std::vector<std::vector<double>> jump_cdf_;  // last column: absorption
};

struct PathRecord {
    double discounted_dividends = 0.0;
    double discounted_injections = 0.0;
    long n_observations = 0;
    long n_jumps = 0;
};

enum class PathEventKind { step, jump, observation };

struct PathEvent {
    PathEventKind kind;
    double time;
    double state_before;
    double state_after;
    double dividend;   // undiscounted amount paid at this event
    double injection;  // undiscounted amount injected at this event
};

using PathObserver = std::function<void(const PathEvent&)>;

/// One path of the surplus under the periodic-classical barrier strategy:
/// drift plus Brownian motion on an Euler grid with projection at 0 (the
/// grid widens to a single exact Gaussian step wherever reaching 0 within the
/// step has probability below 1e-15), phase-type jumps with immediate
/// injection of any deficit, and payment of U - b at the Poisson(r)
/// observation epochs when U > b.
PathRecord simulate_path(const BarrierProblem& problem, double b, double x0, const SimConfig& config,
                         RandomStream& rng, const PathObserver& observer = {});

struct EstimateResult {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    /// Crude bound on the contribution ignored after the horizon:
    /// cutoff * (b + (|c| + sigma + beta (lambda E[Z] + sigma)) / q).
    double truncation_bound = 0.0;
    double dividends_mean = 0.0;
    double injections_mean = 0.0;  // undiscounted by beta
};

/// Monte Carlo estimate of v_b(x0). Writes one CSV row per path to
/// `path_log` when given (path_id,dividends_npv,injections_npv,n_obs,n_jumps).
EstimateResult estimate_value(const BarrierProblem& problem, double b, double x0, const SimConfig& config,
                              std::ostream* path_log = nullptr);

struct BiasProbeRow {
    double time_step = 0.0;
    EstimateResult estimate;
};

struct BiasProbe {
    std::vector<BiasProbeRow> rows;  // time_step h, h/2, h/4
    /// Extrapolation of the two finest runs assuming an O(sqrt(h)) leading bias.
    double extrapolated = 0.0;
    double extrapolated_std_error = 0.0;  // treating the runs as independent
    double extrapolated_dividends = 0.0;
    double extrapolated_injections = 0.0;
};

/// Re-runs estimate_value at time steps h, h/2, h/4 with common seeds.
BiasProbe bias_probe(const BarrierProblem& problem, double b, double x0, const SimConfig& config);

}  // namespace pdiv
