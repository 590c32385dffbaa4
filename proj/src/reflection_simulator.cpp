#include "pdiv/reflection_simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "pdiv/error.hpp"
#include "pdiv/parallel.hpp"

namespace pdiv {

void SimConfig::validate() const {
    if (!(time_step > 0.0 && time_step <= 1e-2)) {
        throw Error(ErrorCode::InvalidArgument, "time_step must lie in (0, 1e-2]");
    }
    if (!(discount_cutoff > 0.0 && discount_cutoff <= 1e-3)) {
        throw Error(ErrorCode::InvalidArgument, "discount_cutoff must lie in (0, 1e-3]");
    }
    if (n_paths == 0) throw Error(ErrorCode::InvalidArgument, "n_paths must be positive");
    if (antithetic && n_paths % 2 != 0) {
        throw Error(ErrorCode::InvalidArgument, "antithetic sampling needs an even n_paths");
    }
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream, bool mirrored) : mirrored_(mirrored) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
}

double RandomStream::uniform() {
    const double u = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    return mirrored_ ? 1.0 - u : u;
}

double RandomStream::normal() {
    const double z = gauss_(engine_);
    return mirrored_ ? -z : z;
}

double RandomStream::exponential(double rate) { return -std::log(uniform()) / rate; }

PhaseTypeSampler::PhaseTypeSampler(const PhaseTypeDistribution& dist) {
    const int m = dist.num_phases();
    const Eigen::VectorXd exit = dist.exit_vector();
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
        acc += dist.initial_law(i);
        initial_cdf_.push_back(acc);
    }
    for (int i = 0; i < m; ++i) {
        const double rate = -dist.subgenerator(i, i);
        hold_rate_.push_back(rate);
        std::vector<double> cdf;
        double row = 0.0;
        for (int j = 0; j < m; ++j) {
            if (j != i) row += dist.subgenerator(i, j) / rate;
            cdf.push_back(row);
        }
        cdf.push_back(row + std::max(exit(i), 0.0) / rate);
        jump_cdf_.push_back(std::move(cdf));
    }
}

double PhaseTypeSampler::sample(RandomStream& rng) const {
    const auto pick = [](const std::vector<double>& cdf, double u) {
        u *= cdf.back();
        return static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    };
    const std::size_t absorbed = hold_rate_.size();
    std::size_t phase = std::min(pick(initial_cdf_, rng.uniform()), absorbed - 1);
    double total = 0.0;
    for (;;) {
        total += rng.exponential(hold_rate_[phase]);
        const auto& cdf = jump_cdf_[phase];
        std::size_t next = pick(cdf, rng.uniform());
        // a zero-probability column can only be hit at u == cdf value; skip it
        while (next < absorbed && (next == phase || cdf[next] == (next ? cdf[next - 1] : 0.0))) ++next;
        if (next >= absorbed) return total;
        phase = next;
    }
}

PathRecord simulate_path(const BarrierProblem& problem, double b, double x0, const SimConfig& config,
                         RandomStream& rng, const PathObserver& observer) {
    if (!(x0 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "simulate_path needs x0 >= 0");
    const LevyModel& model = problem.model();
    const double c = model.drift_c;
    const double sigma = model.sigma;
    const double lambda = model.has_jumps() ? model.jump_rate : 0.0;
    const double q = problem.q();
    const double r = problem.r();
    const double dt = config.time_step;
    const double horizon = -std::log(config.discount_cutoff) / q;
    const PhaseTypeSampler sampler = lambda > 0.0 ? PhaseTypeSampler(model.jump_dist) : PhaseTypeSampler({});
    constexpr double inf = std::numeric_limits<double>::infinity();
    // P(inf of sigma B over [0, h] < -8 sigma sqrt(h)) = 2 Phi(-8) ~ 1.2e-15
    constexpr double safe_sigmas = 8.0;

    PathRecord rec;
    double t = 0.0;
    double u = x0;
    double next_jump = lambda > 0.0 ? rng.exponential(lambda) : inf;
    double next_obs = rng.exponential(r);

    auto evolve = [&](double t_end) {
        if (sigma == 0.0) {
            const double h = t_end - t;
            const double before = u;
            u += c * h;
            if (u < 0.0) {
                // pure negative drift held at 0: inject |c| per unit time after hitting
                const double hit = t + before / -c;
                rec.discounted_injections += -c * (std::exp(-q * hit) - std::exp(-q * t_end)) / q;
                u = 0.0;
            }
            t = t_end;
            return;
        }
        while (t < t_end) {
            const double remaining = t_end - t;
            double root;
            if (c >= 0.0) {
                root = u / (safe_sigmas * sigma);
            } else {
                const double a = -c;
                const double k = safe_sigmas * sigma;
                root = (-k + std::sqrt(k * k + 4.0 * a * std::max(u, 0.0))) / (2.0 * a);
            }
            const double safe = root * root;
            const double h = safe >= remaining ? remaining : std::min(std::max(safe, dt), remaining);
            const double before = u;
            u += c * h + sigma * std::sqrt(h) * rng.normal();
            t = h == remaining ? t_end : t + h;
            double injected = 0.0;
            if (u < 0.0) {
                injected = -u;
                rec.discounted_injections += injected * std::exp(-q * t);
                u = 0.0;
            }
            if (observer) observer({PathEventKind::step, t, before, u, 0.0, injected});
        }
    };

    for (;;) {
        const double t_event = std::min({next_jump, next_obs, horizon});
        evolve(t_event);
        if (t_event >= horizon) break;
        const double discount = std::exp(-q * t);
        if (next_jump <= next_obs) {
            ++rec.n_jumps;
            const double before = u;
            u -= sampler.sample(rng);
            double injected = 0.0;
            if (u < 0.0) {
                injected = -u;
                rec.discounted_injections += injected * discount;
                u = 0.0;
            }
            if (observer) observer({PathEventKind::jump, t, before, u, 0.0, injected});
            next_jump = t + rng.exponential(lambda);
        } else {
            ++rec.n_observations;
            const double before = u;
            double paid = 0.0;
            if (u > b) {
                paid = u - b;
                rec.discounted_dividends += paid * discount;
                u = b;
            }
            if (observer) observer({PathEventKind::observation, t, before, u, paid, 0.0});
            next_obs = t + rng.exponential(r);
        }
    }
    return rec;
}

namespace {

struct Moments {
    double mean = 0.0;
    double std_error = 0.0;
};

Moments moments(const std::vector<double>& samples) {
    const auto n = static_cast<double>(samples.size());
    Moments m;
    for (double s : samples) m.mean += s;
    m.mean /= n;
    double ss = 0.0;
    for (double s : samples) ss += (s - m.mean) * (s - m.mean);
    m.std_error = samples.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return m;
}

}  // namespace

EstimateResult estimate_value(const BarrierProblem& problem, double b, double x0, const SimConfig& config,
                              std::ostream* path_log) {
    config.validate();
    if (!(b >= 0.0)) throw Error(ErrorCode::InvalidArgument, "barrier must be >= 0");
    const std::size_t n = config.n_paths;
    std::vector<PathRecord> records(n);

    parallel_for(n, config.workers, [&](std::size_t i) {
        const std::uint64_t stream = config.antithetic ? i / 2 : i;
        RandomStream rng(config.seed, stream, config.antithetic && (i % 2 == 1));
        records[i] = simulate_path(problem, b, x0, config, rng);
    });

    const double beta = problem.beta();
    // Antithetic pairs are averaged first so the standard error sees independent samples.
    const std::size_t group = config.antithetic ? 2 : 1;
    std::vector<double> payoff(n / group), dividends(n / group), injections(n / group);
    for (std::size_t k = 0; k < n / group; ++k) {
        for (std::size_t j = 0; j < group; ++j) {
            const auto& rec = records[k * group + j];
            payoff[k] += (rec.discounted_dividends - beta * rec.discounted_injections) / group;
            dividends[k] += rec.discounted_dividends / group;
            injections[k] += rec.discounted_injections / group;
        }
    }

    if (path_log) {
        *path_log << "path_id,dividends_npv,injections_npv,n_obs,n_jumps\n";
        for (std::size_t i = 0; i < n; ++i) {
            const auto& rec = records[i];
            *path_log << fmt::format("{},{:.12g},{:.12g},{},{}\n", i, rec.discounted_dividends,
                                     rec.discounted_injections, rec.n_observations, rec.n_jumps);
        }
    }

    const auto& model = problem.model();
    const double mean_jump = model.has_jumps() ? model.jump_rate * problem.diagnostics().mean_jump : 0.0;
    EstimateResult out;
    const Moments total = moments(payoff);
    out.mean = total.mean;
    out.std_error = total.std_error;
    out.n_paths = n;
    out.dividends_mean = moments(dividends).mean;
    out.injections_mean = moments(injections).mean;
    out.truncation_bound =
        config.discount_cutoff *
        (b + (std::abs(model.drift_c) + model.sigma + beta * (mean_jump + model.sigma)) / problem.q());
    return out;
}

BiasProbe bias_probe(const BarrierProblem& problem, double b, double x0, const SimConfig& config) {
    BiasProbe probe;
    SimConfig run = config;
    for (int k = 0; k < 3; ++k) {
        run.time_step = config.time_step / static_cast<double>(1 << k);
        probe.rows.push_back({run.time_step, estimate_value(problem, b, x0, run)});
    }
    // V(h) = V + a sqrt(h): V = (sqrt2 V(h/4) - V(h/2)) / (sqrt2 - 1)
    const double root2 = std::sqrt(2.0);
    auto extrapolate = [&](auto field) {
        return (root2 * field(probe.rows[2].estimate) - field(probe.rows[1].estimate)) / (root2 - 1.0);
    };
    probe.extrapolated = extrapolate([](const EstimateResult& e) { return e.mean; });
    const double se1 = probe.rows[1].estimate.std_error;
    const double se2 = probe.rows[2].estimate.std_error;
    probe.extrapolated_std_error = std::sqrt(2.0 * se2 * se2 + se1 * se1) / (root2 - 1.0);
    probe.extrapolated_dividends = extrapolate([](const EstimateResult& e) { return e.dividends_mean; });
    probe.extrapolated_injections = extrapolate([](const EstimateResult& e) { return e.injections_mean; });
    return probe;
}

}  // namespace pdiv
