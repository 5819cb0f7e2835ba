#include "hsd/experiments.hpp"
#include "hsd/objective.hpp"
#include "hsd/powell.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace hsd;

namespace {

BoxBounds cube(std::size_t n, double lo, double hi) {
    return {std::vector<double>(n, lo), std::vector<double>(n, hi)};
}

// Strictly convex quadratic 0.5 (x-c)^T H (x-c) with a random SPD H.
struct Quadratic {
    Eigen::MatrixXd h;
    Eigen::VectorXd c;

    double operator()(std::span<const double> x) const {
        const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
        const Eigen::VectorXd d = v - c;
        return 0.5 * d.dot(h * d);
    }
};

Quadratic random_quadratic(std::size_t n, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd b(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            b(i, j) = u(gen);
        }
    }
    Eigen::VectorXd c(n);
    for (std::size_t i = 0; i < n; ++i) {
        c[i] = 0.5 * u(gen);
    }
    const auto dim = static_cast<Eigen::Index>(n);
    return {b.transpose() * b + 0.5 * Eigen::MatrixXd::Identity(dim, dim), c};
}

} // namespace

TEST(LineBounds, AxisDirectionFromCenter) {
    const BoxBounds b{{-2, -1, 0}, {2, 1, 1}};
    const std::vector<double> x{0.5, 0.0, 0.5};
    const LineInterval i = line_bounds(x, std::vector<double>{1, 0, 0}, b);
    EXPECT_DOUBLE_EQ(i.t_min, -2.5);
    EXPECT_DOUBLE_EQ(i.t_max, 1.5);
}

TEST(LineBounds, DepthAxis) {
    const BoxBounds b{{-2, -1, 0}, {2, 1, 1}};
    const LineInterval i = line_bounds(std::vector<double>{0, 0, 0.5}, std::vector<double>{0, 0, 1}, b);
    EXPECT_DOUBLE_EQ(i.t_min, -0.5);
    EXPECT_DOUBLE_EQ(i.t_max, 0.5);
}

TEST(LineBounds, ZeroComponentImposesNoBound) {
    const BoxBounds b{{-2, -1}, {2, 1}};
    const LineInterval i = line_bounds(std::vector<double>{0.9, 0.0}, std::vector<double>{0, 2}, b);
    EXPECT_DOUBLE_EQ(i.t_min, -0.5);
    EXPECT_DOUBLE_EQ(i.t_max, 0.5);
}

TEST(LineBounds, DiagonalTakesTightestFace) {
    const BoxBounds b = cube(2, -1, 1);
    const LineInterval i = line_bounds(std::vector<double>{0.5, 0.0}, std::vector<double>{1, -1}, b);
    EXPECT_DOUBLE_EQ(i.t_min, -1.0);
    EXPECT_DOUBLE_EQ(i.t_max, 0.5);
}

TEST(LineBounds, ZeroDirectionThrows) {
    EXPECT_THROW(line_bounds(std::vector<double>{0, 0}, std::vector<double>{0, 0}, cube(2, -1, 1)), ContractViolation);
}

TEST(Brent, Quadratic) {
    const LineMinimum m = brent_min([](double t) { return (t - 0.3) * (t - 0.3); }, -1.0, 1.0, 1e-8);
    EXPECT_NEAR(m.t, 0.3, 1e-7);
    EXPECT_NEAR(m.value, 0.0, 1e-14);
}

TEST(Brent, MonotoneGoesToLeftEnd) {
    const LineMinimum m = brent_min([](double t) { return std::exp(t); }, 0.0, 1.0, 1e-8);
    EXPECT_EQ(m.t, 0.0);
    EXPECT_EQ(m.value, 1.0);
}

TEST(Brent, DecreasingGoesToRightEnd) {
    const LineMinimum m = brent_min([](double t) { return -t; }, -0.5, 2.0, 1e-8);
    EXPECT_EQ(m.t, 2.0);
}

TEST(Brent, Cosine) {
    const LineMinimum m = brent_min([](double t) { return std::cos(t); }, 2.0, 4.0, 1e-8);
    EXPECT_NEAR(m.t, std::numbers::pi, 1e-7);
    EXPECT_NEAR(m.value, -1.0, 1e-14);
}

TEST(Brent, NeverWorseThanZero) {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        const double a = u(gen), b = u(gen);
        auto f = [&](double t) { return std::sin(3 * t + a) + 0.2 * t * b; };
        const LineMinimum m = brent_min(f, -1.0, 1.5, 1e-8, f(0.0));
        EXPECT_LE(m.value, f(0.0));
        EXPECT_EQ(m.value, f(m.t));
    }
}

TEST(Brent, NonFiniteValueThrows) {
    EXPECT_THROW(brent_min([](double) { return std::nan(""); }, 0.0, 1.0, 1e-8), SearchError);
}

TEST(Brent, EmptyIntervalThrows) {
    EXPECT_THROW(brent_min([](double t) { return t; }, 1.0, 1.0, 1e-8), ContractViolation);
}

TEST(Powell, ShiftedSphereConvergesQuickly) {
    const std::vector<double> c{0.3, -0.7, 0.2, 0.9};
    auto f = [&](std::span<const double> x) {
        double s = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            s += (x[i] - c[i]) * (x[i] - c[i]);
        }
        return s;
    };
    PowellOptions three;
    three.max_sweeps = 3;
    const PowellResult r = powell_minimize(f, std::vector<double>(4, 0.0), cube(4, -2, 2), three);
    EXPECT_LE(r.sweeps, 3u);
    for (std::size_t i = 0; i < c.size(); ++i) {
        EXPECT_NEAR(r.x[i], c[i], 1e-6);
    }
    const PowellResult full = powell_minimize(f, std::vector<double>(4, 0.0), cube(4, -2, 2), PowellOptions{});
    EXPECT_EQ(full.stop, PowellStop::converged);
}

TEST(Powell, MinimizerOutsideBoxProjects) {
    // Separable quadratic: the constrained optimum clips the active coordinates.
    const std::vector<double> c{3.0, -0.4, -5.0};
    auto f = [&](std::span<const double> x) {
        return (x[0] - c[0]) * (x[0] - c[0]) + 2 * (x[1] - c[1]) * (x[1] - c[1]) + (x[2] - c[2]) * (x[2] - c[2]);
    };
    const PowellResult r = powell_minimize(f, std::vector<double>{0, 0, 0}, cube(3, -1, 1), PowellOptions{});
    EXPECT_NEAR(r.x[0], 1.0, 1e-7);
    EXPECT_NEAR(r.x[1], -0.4, 1e-6);
    EXPECT_NEAR(r.x[2], -1.0, 1e-7);
}

TEST(Powell, QuadraticExactness) {
    std::mt19937_64 gen(12);
    for (std::size_t n = 1; n <= 12; ++n) {
        for (int trial = 0; trial < 3; ++trial) {
            const Quadratic q = random_quadratic(n, gen);
            PowellOptions opts;
            opts.value_tol = 1e-15;
            opts.line_tol = 1e-10;
            opts.max_sweeps = n + 2;
            opts.eval_budget = 1'000'000;
            const PowellResult r = powell_minimize(q, std::vector<double>(n, 0.0), cube(n, -10, 10), opts);
            EXPECT_LE(r.sweeps, n + 2);
            for (std::size_t i = 0; i < n; ++i) {
                EXPECT_NEAR(r.x[i], q.c[static_cast<Eigen::Index>(i)], 1e-8) << "n=" << n << " i=" << i;
            }
        }
    }
}

TEST(Powell, MonotoneAndFeasible) {
    std::mt19937_64 gen(13);
    const BoxBounds bounds = cube(6, -1, 1);
    std::size_t infeasible = 0;
    auto rastrigin = [&](std::span<const double> x) {
        if (!bounds.contains(x)) {
            ++infeasible;
        }
        double s = 0;
        for (double xi : x) {
            s += xi * xi - 0.3 * std::cos(6 * xi);
        }
        return s;
    };
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x0(6);
        for (auto& v : x0) {
            v = u(gen);
        }
        const double f0 = rastrigin(x0);
        const PowellResult r = powell_minimize(rastrigin, x0, bounds, PowellOptions{});
        EXPECT_LE(r.value, f0);
        for (std::size_t s = 1; s < r.sweep_values.size(); ++s) {
            EXPECT_LE(r.sweep_values[s], r.sweep_values[s - 1]);
        }
        EXPECT_TRUE(bounds.contains(r.x));
    }
    EXPECT_EQ(infeasible, 0u);
}

TEST(Powell, BudgetStopReturnsBestSoFar) {
    auto f = [](std::span<const double> x) {
        double s = 0;
        for (std::size_t i = 0; i + 1 < x.size(); ++i) {
            s += 100 * std::pow(x[i + 1] - x[i] * x[i], 2) + std::pow(1 - x[i], 2);
        }
        return s;
    };
    PowellOptions opts;
    opts.eval_budget = 50;
    const std::vector<double> x0{-1.2, 1.0, -0.5, 0.3};
    const PowellResult r = powell_minimize(f, x0, cube(4, -2, 2), opts);
    EXPECT_EQ(r.stop, PowellStop::budget_exhausted);
    EXPECT_LE(r.evals, 50u);
    EXPECT_LE(r.value, f(x0));
    EXPECT_EQ(r.value, f(r.x));
}

TEST(Powell, InfeasibleStartThrows) {
    auto f = [](std::span<const double> x) { return x[0]; };
    EXPECT_THROW(powell_minimize(f, std::vector<double>{3.0}, cube(1, -1, 1), PowellOptions{}), ContractViolation);
}

TEST(Powell, OptionsValidation) {
    PowellOptions opts;
    opts.value_tol = 0.0;
    EXPECT_THROW(validate(opts), ConfigError);
}

TEST(Powell, OneScattererReducedObjective) {
    const Scatterer truth{{0.55, -0.35, 0.45}, 0.9};
    ExperimentSpec spec = experiment1();
    spec.truth = {truth};
    const ObjectiveContext ctx(simulate(spec), spec.box, spec.v_max, 1);
    const BoxBounds bounds = tile_box(spec.box, 1, 1e-9);
    auto f = [&](std::span<const double> x) { return phi_tilde(ctx, std::vector<Point3>{{x[0], x[1], x[2]}}); };
    const std::vector<std::vector<double>> starts{{0.75, -0.2, 0.35}, {0.4, -0.5, 0.6}, {0.7, -0.25, 0.55}};
    for (const auto& x0 : starts) {
        const PowellResult r = powell_minimize(f, x0, bounds, PowellOptions{});
        EXPECT_NEAR(r.x[0], truth.position.x1, 1e-4);
        EXPECT_NEAR(r.x[1], truth.position.x2, 1e-4);
        EXPECT_NEAR(r.x[2], truth.position.x3, 1e-4);
    }
}

TEST(TileBox, InsetBoundsAreInsideOpenBox) {
    const Box box{};
    const BoxBounds b = tile_box(box, 2, 1e-9);
    ASSERT_EQ(b.size(), 6u);
    EXPECT_GT(b.lower[2], 0.0);
    EXPECT_LT(b.upper[0], 2.0);
    EXPECT_EQ(b.lower[3], b.lower[0]);
}
