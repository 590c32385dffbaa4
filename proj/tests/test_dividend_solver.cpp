#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pdiv/config.hpp"
#include "pdiv/dividend_solver.hpp"
#include "pdiv/error.hpp"

using namespace pdiv;

namespace {

BarrierProblem problem_for(const char* name) {
    const auto cfg = preset(name);
    return BarrierProblem(cfg.model, cfg.q, cfg.r, cfg.beta);
}

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no pdiv::Error thrown";
    return ErrorCode::InvalidArgument;
}

std::vector<double> grid(double lo, double hi, double step) {
    std::vector<double> out;
    for (double x = lo; x <= hi + 1e-12; x += step) out.push_back(x);
    return out;
}

}  // namespace

TEST(BarrierProblem, RejectsInvalidParameters) {
    const auto m = oracle::case_model("case1");
    EXPECT_EQ(code_of([&] { BarrierProblem(m, 0.0, 0.5, 1.5); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { BarrierProblem(m, 0.05, -1.0, 1.5); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { BarrierProblem(m, 0.05, 0.5, 1.0); }), ErrorCode::InvalidArgument);
    const auto p = problem_for("case1");
    EXPECT_EQ(code_of([&] { g(p, -1.0); }), ErrorCode::InvalidArgument);
}

TEST(GFunction, UnboundedVariationAtZero) {
    const auto p = problem_for("case1");
    EXPECT_NEAR(g(p, 0.0), p.beta() - 1.0, 1e-12);
}

TEST(GFunction, BoundedVariationAtZero) {
    const auto p = problem_for("case2");
    const double c = p.model().drift_c;
    const double expected =
        p.beta() - 1.0 - (p.r() * (p.beta() - 1.0) + p.q() * p.beta()) / (c * p.phi_qr());
    EXPECT_NEAR(g(p, 0.0), expected, 1e-12);
}

TEST(GFunction, DeepBarrierLimit) {
    // Case 2 has a level-q root near -0.09, so the approach is slow; b = 200 is deep enough for both.
    for (const char* name : {"case1", "case2"}) {
        const auto p = problem_for(name);
        EXPECT_NEAR(g(p, 200.0), -p.phi_q() / p.phi_qr(), 1e-5) << name;
    }
}

TEST(GFunction, ProbabilisticFormAgrees) {
    for (const char* name : {"case1", "case2"}) {
        const auto p = problem_for(name);
        for (double b = 0.1; b <= 5.0 + 1e-12; b += 0.1) {
            const double gp = g_probabilistic(p, b);
            EXPECT_NEAR(gp, g(p, b), 1e-9) << name << " b=" << b;
            const double passage = ruin_transform(p, b, b);
            EXPECT_EQ(gp > 0.0, p.beta() * passage - 1.0 > 0.0);
        }
        EXPECT_NEAR(g_probabilistic(p, 200.0), -p.phi_q() / p.phi_qr(), 1e-5);
    }
}

TEST(GFunction, ProbabilisticFormDegenerateAtZeroForUnboundedVariation) {
    const auto p = problem_for("case1");
    EXPECT_EQ(code_of([&] { g_probabilistic(p, 0.0); }), ErrorCode::DegenerateDenominator);
    // bounded variation keeps a usable denominator at 0
    const auto p2 = problem_for("case2");
    EXPECT_NEAR(g_probabilistic(p2, 0.0), g(p2, 0.0), 1e-9);
}

TEST(GFunction, SingleCrossing) {
    for (const char* name : {"case1", "case2"}) {
        const auto p = problem_for(name);
        int changes = 0;
        bool prev = g(p, 1e-4) > 0.0;
        for (double b = 1e-4; b < 200.0; b *= 1.05) {
            const bool pos = g(p, b) > 0.0;
            if (pos != prev) {
                ++changes;
                EXPECT_TRUE(prev) << "crossing from - to +";
            }
            prev = pos;
        }
        EXPECT_LE(changes, 1);
    }
}

TEST(OptimalBarrier, Case1IsInterior) {
    const auto p = problem_for("case1");
    const auto sol = optimal_barrier(p);
    EXPECT_GT(sol.b_star, 0.0);
    EXPECT_TRUE(sol.converged);
    EXPECT_LE(std::abs(g(p, sol.b_star)), 1e-10);
    EXPECT_GT(g(p, sol.b_star - 1e-6), 0.0);
    EXPECT_LT(g(p, sol.b_star + 1e-6), 0.0);
}

TEST(OptimalBarrier, Case2IsZero) {
    const auto p = problem_for("case2");
    const auto sol = optimal_barrier(p);
    EXPECT_EQ(sol.b_star, 0.0);
    EXPECT_LE(sol.g_at_zero, 0.0);
    EXPECT_NEAR(sol.C_at_b_star, C(p, 0.0), 1e-12);
}

TEST(OptimalBarrier, UnboundedVariationAlwaysInterior) {
    auto m = oracle::case_model("case1");
    for (double beta : {1.001, 1.05, 3.0}) {
        for (double sigma : {0.05, 1.0}) {
            m.sigma = sigma;
            const BarrierProblem p(m, 0.05, 0.5, beta);
            EXPECT_GT(optimal_barrier(p).b_star, 0.0) << beta << " " << sigma;
        }
    }
}

TEST(CFunction, ZeroBarrierClosedForm) {
    for (const char* name : {"case1", "case2"}) {
        const auto p = problem_for(name);
        const double c0 = (p.r() * (p.beta() - 1.0) + p.q() * p.beta()) / (p.q() * p.phi_qr());
        EXPECT_NEAR(C(p, 0.0), c0, 1e-12 * c0);
    }
}

TEST(CFunction, SimplifiesAtOptimalBarrier) {
    const auto p = problem_for("case1");
    const auto sol = optimal_barrier(p);
    const double simplified =
        (p.beta() * p.scale_q().Z(sol.b_star) - 1.0) / (p.q() * p.scale_q().W(sol.b_star));
    EXPECT_NEAR(C(p, sol.b_star), simplified, 1e-10 * std::abs(simplified));
    EXPECT_NEAR(sol.C_at_b_star, simplified, 1e-12 * std::abs(simplified));
}

TEST(CFunction, Continuous) {
    // no jumps anywhere on [0, 5]: nearby barriers give nearby C
    const auto p = problem_for("case1");
    double worst = 0.0;
    for (double b = 0.0; b <= 5.0; b += 0.01) worst = std::max(worst, std::abs(C(p, b + 1e-8) - C(p, b)));
    EXPECT_LT(worst, 1e-6);
}

TEST(Value, LowerBranchClosedForm) {
    for (const char* name : {"case1", "case2"}) {
        const auto p = problem_for(name);
        const double b = 2.0;
        const BarrierValue v(p, b);
        const auto& s = p.scale_q();
        for (double x = 0.0; x <= b; x += 0.1) {
            const double expected = -v.C() * s.Z(x) + p.beta() * (s.Z_bar(x) + s.psi_prime_at_zero() / p.q());
            EXPECT_NEAR(v.value(x), expected, 1e-10 * (1 + std::abs(expected)));
        }
        // both branches meet at b
        EXPECT_NEAR(v.value(b + 1e-12), v.value(b), 1e-9);
    }
}

TEST(Value, LinearExtensionBelowZero) {
    const auto p = problem_for("case1");
    const BarrierValue v(p, 1.0);
    EXPECT_NEAR(v.value(-2.0), -2.0 * p.beta() + v.value(0.0), 1e-14);
    EXPECT_EQ(v.derivative(-2.0), p.beta());
}

TEST(Value, CancellationIsClean) {
    for (const char* name : {"case1", "case2"}) {
        const auto p = problem_for(name);
        for (double b : {0.0, 0.5, 1.6, 5.0}) EXPECT_LT(BarrierValue(p, b).cancellation_residual(), 1e-8) << name << b;
    }
}

TEST(Value, LargeRStaysFinite) {
    const auto cfg = preset("case1");
    const BarrierProblem p(cfg.model, cfg.q, 50.0, cfg.beta);
    const auto sol = optimal_barrier(p);
    const BarrierValue v(p, sol.b_star);
    for (double x : {0.0, 1.0, 10.0, 100.0}) EXPECT_TRUE(std::isfinite(v.value(x))) << x;
    EXPECT_NEAR(v.derivative(100.0), 50.0 / 50.05, 1e-3);
}

TEST(Derivative, SmoothPasting) {
    const auto p = problem_for("case1");
    const auto sol = optimal_barrier(p);
    const BarrierValue v(p, sol.b_star);
    EXPECT_LE(std::abs(v.derivative(sol.b_star) - 1.0), 1e-10);
    EXPECT_LE(std::abs(v.derivative(sol.b_star + 1e-13) - 1.0), 1e-10);
}

TEST(Derivative, ZeroBarrierSlopeAtMostOne) {
    const auto p = problem_for("case2");
    EXPECT_LE(derivative(p, 0.0, 1e-12), 1.0 + 1e-12);
}

TEST(Derivative, UnboundedVariationSlopeBetaAtZero) {
    const auto p = problem_for("case1");
    for (double b : {0.5, 1.6, 3.0}) EXPECT_NEAR(derivative(p, b, 1e-12), p.beta(), 1e-9);
}

TEST(Derivative, FiniteDifferences) {
    for (const char* name : {"case1", "case2"}) {
        const auto p = problem_for(name);
        for (double b : {0.0, 1.0, 2.5}) {
            const BarrierValue v(p, b);
            for (double x : {0.3, 0.7, 1.4, 2.2, 3.1, 6.0}) {
                if (std::abs(x - b) < 0.01) continue;
                const double fd = oracle::central_diff([&](double u) { return v.value(u); }, x, 1e-4);
                EXPECT_NEAR(v.derivative(x), fd, 1e-6) << name << " b=" << b << " x=" << x;
                const double fd2 = oracle::central_diff([&](double u) { return v.derivative(u); }, x, 1e-4);
                EXPECT_NEAR(v.second_derivative_right(x), fd2, 1e-6) << name << " b=" << b << " x=" << x;
            }
        }
    }
}

TEST(Derivative, BoundsAndMonotonicityAtOptimum) {
    for (const char* name : {"case1", "case2"}) {
        const auto p = problem_for(name);
        const auto sol = optimal_barrier(p);
        const BarrierValue v(p, sol.b_star);
        double prev = INFINITY;
        for (double x : vi_grid(sol.b_star)) {
            const double d = v.derivative(x);
            if (x < sol.b_star) {
                EXPECT_GE(d, 1.0 - 1e-9);
                EXPECT_LE(d, p.beta() + 1e-9);
            } else {
                EXPECT_GE(d, -1e-9);
                EXPECT_LE(d, 1.0 + 1e-9);
            }
            EXPECT_LE(d, prev + 1e-12) << x;
            prev = d;
        }
    }
}

TEST(Derivative, ZeroBarrierConcaveWithLinearGrowth) {
    const auto p = problem_for("case2");
    const BarrierValue v(p, 0.0);
    for (double x = 0.01; x <= 100.0; x += 0.05) EXPECT_LE(v.second_derivative_right(x), 1e-9) << x;
    EXPECT_NEAR(v.derivative(100.0), p.r() / (p.r() + p.q()), 1e-3);
}

TEST(RuinTransform, BasicProperties) {
    for (const char* name : {"case1", "case2"}) {
        const auto p = problem_for(name);
        for (double b : {0.0, 1.0, 3.0}) {
            const BarrierValue v(p, b);
            EXPECT_EQ(v.ruin_transform(-0.5), 1.0);
            double prev = 1.0;
            for (double x = 0.0; x <= 15.0; x += 0.05) {
                const double e = v.ruin_transform(x);
                EXPECT_GE(e, -1e-12);
                EXPECT_LE(e, 1.0 + 1e-12);
                EXPECT_LE(e, prev + 1e-12) << name << " b=" << b << " x=" << x;
                prev = e;
            }
        }
        EXPECT_LT(ruin_transform(p, 200.0, 200.0), 1e-6);
    }
}

TEST(RuinTransform, MatchesDerivativeAtOptimum) {
    const auto p = problem_for("case1");
    const auto sol = optimal_barrier(p);
    const BarrierValue v(p, sol.b_star);
    double worst = 0.0;
    for (double x = 0.01; x <= 10.0; x += 0.01) {
        worst = std::max(worst, std::abs(p.beta() * v.ruin_transform(x) - v.derivative(x)));
    }
    EXPECT_LE(worst, 1e-8);
}

TEST(Generator, AnnihilatesScaleFunctions) {
    for (const char* name : {"case1", "case2"}) {
        const auto p = problem_for(name);
        const auto& s = p.scale_q();
        const double q = p.q();
        const SmoothFunction z{[&](double x) { return s.Z(x); }, [&](double x) { return q * s.W(x); },
                               [&](double x) { return q * s.W_prime_right(x); }};
        const double shift = s.psi_prime_at_zero() / q;
        const SmoothFunction zbar{[&](double x) { return s.Z_bar(x) + shift; }, [&](double x) { return s.Z(x); },
                                  [&](double x) { return q * s.W(x); }};
        for (double y : {0.1, 0.5, 1.0, 3.0, 7.0}) {
            EXPECT_NEAR(generator_apply(p.model(), z, y) - q * s.Z(y), 0.0, 1e-6 * s.Z(y)) << name << y;
            EXPECT_NEAR(generator_apply(p.model(), zbar, y) - q * zbar.value(y), 0.0, 1e-6 * (1 + std::abs(zbar.value(y))))
                << name << y;
        }
    }
}

TEST(Generator, ShiftedIntegratedScaleFunction) {
    for (const char* name : {"case1", "case2"}) {
        const auto p = problem_for(name);
        const auto& s2 = p.scale_qr();
        const double q = p.q();
        const double r = p.r();
        const double b = 1.0;
        const SmoothFunction f{[&](double x) { return s2.W_bar(x - b); }, [&](double x) { return s2.W(x - b); },
                               [&](double x) { return s2.W_prime_right(x - b); }};
        for (double x : {1.2, 2.0, 4.0}) {
            GeneratorOptions opts;
            opts.breakpoints = {x - b};
            const double lhs = generator_apply(p.model(), f, x, opts) - q * f.value(x);
            const double rhs = 1.0 + r * s2.W_bar(x - b);
            EXPECT_NEAR(lhs, rhs, 1e-6 * rhs) << name << x;
        }
    }
}

TEST(Generator, RejectsNonPositivePoint) {
    const auto p = problem_for("case1");
    const SmoothFunction f{[](double) { return 1.0; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
    EXPECT_EQ(code_of([&] { generator_apply(p.model(), f, 0.0); }), ErrorCode::InvalidArgument);
}

TEST(VariationalInequality, Case1Holds) {
    const auto p = problem_for("case1");
    const auto sol = optimal_barrier(p);
    const auto xs = vi_grid(sol.b_star);
    ASSERT_EQ(xs.size(), 400u);
    const auto report = vi_check(p, sol, xs);
    EXPECT_TRUE(report.passed());
    EXPECT_NO_THROW(report.require());
    EXPECT_TRUE(std::isfinite(report.v_at_zero));
    for (const auto& pt : report.points) EXPECT_NEAR(pt.max_scanned, pt.max_closed, 1e-7 * (1 + std::abs(pt.v)));
}

TEST(VariationalInequality, Case2Holds) {
    const auto p = problem_for("case2");
    const auto sol = optimal_barrier(p);
    const auto report = vi_check(p, sol, vi_grid(sol.b_star, 200));
    EXPECT_TRUE(report.passed());
}

TEST(VariationalInequality, WrongBarrierIsDetected) {
    const auto p = problem_for("case1");
    auto sol = optimal_barrier(p);
    sol.b_star += 0.5;
    const auto report = vi_check(p, sol, vi_grid(sol.b_star, 200));
    EXPECT_FALSE(report.passed());
    EXPECT_EQ(code_of([&] { report.require(); }), ErrorCode::ViolationFound);
    bool first_fails = false;
    for (const auto& pt : report.points) first_fails = first_fails || pt.first_inequality > pt.tol_first;
    EXPECT_TRUE(first_fails);
}

TEST(Dominance, Case1) {
    const auto p = problem_for("case1");
    const auto sol = optimal_barrier(p);
    const std::vector<double> bs{0.0, sol.b_star / 2, sol.b_star, 1.5 * sol.b_star};
    const auto xs = grid(0.0, 10.0, 0.05);
    for (const auto& row : dominance_scan(p, sol, bs, xs)) {
        EXPECT_TRUE(row.dominated) << row.b << " " << row.x;
        if (row.b == sol.b_star) EXPECT_EQ(row.v_b, row.v_b_star);
    }
}

TEST(Dominance, Case2) {
    const auto p = problem_for("case2");
    const auto sol = optimal_barrier(p);
    const std::vector<double> bs{0.5, 1.0, 1.5};
    for (const auto& row : dominance_scan(p, sol, bs, grid(0.0, 10.0, 0.05))) EXPECT_TRUE(row.dominated);
}
