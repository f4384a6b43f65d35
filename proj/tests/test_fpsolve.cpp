#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numbers>

#include "income/error.hpp"
#include "income/fpsolve.hpp"
#include "oracles.hpp"

using namespace income;

TEST_CASE("grids and densities")
{
    const auto g = make_log_grid(0.01, 100.0, 5);
    CHECK(g.front() == doctest::Approx(0.01));
    CHECK(g[2] == doctest::Approx(1.0));
    CHECK(g.back() == doctest::Approx(100.0));
    const auto w = cell_widths(g);
    double total = 0.0;
    for (double x : w) total += x;
    CHECK(total == doctest::Approx(100.0 - 0.01));
    CHECK_THROWS_AS(make_log_grid(0.0, 1.0, 10), ValidationError);

    const SteadyStateIPDF d(1.6, 1.6);
    const auto f = sample_density(d, default_grid(1.6, 1.6));
    CHECK(f.grid.size() == 2000);
    CHECK(f.mass() == doctest::Approx(1.0).epsilon(1e-5));
    const auto bump = bump_density(default_grid(1.6, 1.6), 3.0);
    CHECK(bump.mass() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("closed form is a steady state of the discrete flux")
{
    const auto grid = default_grid(1.6, 1.6, 2000);
    const double r2000 = steady_state_residual(1.6, 1.6, grid);
    CHECK(r2000 < 1e-6);

    // Second order in the log spacing.
    const double r1000 = steady_state_residual(1.6, 1.6, default_grid(1.6, 1.6, 1000));
    const double r500 = steady_state_residual(1.6, 1.6, default_grid(1.6, 1.6, 500));
    CHECK(r1000 / r2000 == doctest::Approx(4.0).epsilon(0.1));
    CHECK(r500 / r2000 == doctest::Approx(16.0).epsilon(0.1));

    // A density of the wrong shape has an O(1) residual.
    const auto wrong = sample_density(SteadyStateIPDF(3.0, 1.6), grid);
    CHECK(flux_residual(1.6, 1.6, grid, wrong.values) > 0.1);
}

TEST_CASE("evolve keeps the steady state and conserves mass")
{
    const SteadyStateIPDF d(1.6, 1.6);
    auto f = sample_density(d, default_grid(1.6, 1.6));
    const double m = f.mass();
    for (double& v : f.values) v /= m;
    const auto res = evolve(f, 1.6, PiecewiseLinear(1.6), 2.0, 0.01);
    double worst = 0.0;
    for (std::size_t j = 0; j < f.values.size(); ++j)
        if (f.values[j] > 1e-200) worst = std::max(worst, std::fabs(res.final.values[j] / f.values[j] - 1.0));
    CHECK(worst < 1e-9);
    CHECK(res.max_mass_drift < 1e-12);
    CHECK(res.final.time == doctest::Approx(2.0));
}

TEST_CASE("bump relaxes to the closed form")
{
    const SteadyStateIPDF d(1.6, 1.6);
    const auto f0 = bump_density(default_grid(1.6, 1.6), 3.0);
    EvolveOptions opts;
    for (int k = 1; k <= 40; ++k) opts.snapshot_times.push_back(0.5 * k);
    const auto res = evolve(f0, 1.6, PiecewiseLinear(1.6), 20.0, 0.01, opts);
    double previous = l1_distance(f0, d);
    for (const auto& s : res.snapshots) {
        const double l1 = l1_distance(s, d);
        CHECK(l1 <= previous + 1e-12);
        previous = l1;
    }
    CHECK(l1_distance(res.final, d) < 1e-3);
    CHECK(res.max_mass_drift / 20.0 < 1e-10);
}

TEST_CASE("time-dependent labour rate conserves mass")
{
    const auto f0 = bump_density(default_grid(1.6, 1.6), 1.0, 0.2);
    const PiecewiseLinear c({0.0, 2.0, 4.0}, {1.6, 3.2, 0.8});
    const auto res = evolve(f0, 1.6, c, 4.0, 0.01);
    CHECK(res.max_mass_drift < 1e-10);
    for (double v : res.final.values) CHECK(v >= 0.0);
}

TEST_CASE("rate limit and input validation")
{
    const auto f0 = bump_density(default_grid(1.6, 1.6), 1.0);
    const double limit = max_stable_dt(f0.grid, 1.6, 1.6);
    CHECK(limit > 0.0);
    CHECK_THROWS_AS(evolve(f0, 1.6, PiecewiseLinear(1.6), 1.0, 1.5 * limit), ValidationError);
    CHECK_NOTHROW(evolve(f0, 1.6, PiecewiseLinear(1.6), 2.0 * limit, limit));
    try {
        evolve(f0, 1.6, PiecewiseLinear(1.6), 1.0, 1.5 * limit);
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("use dt <=") != std::string::npos);
    }
    GridDensity bad = f0;
    *std::max_element(bad.values.begin(), bad.values.end()) *= 3.0;  // no longer normalized
    CHECK_THROWS_AS(evolve(bad, 1.6, PiecewiseLinear(1.6), 1.0, 0.01), ValidationError);
}

TEST_CASE("Kummer function against Boost")
{
    const double cases[][3] = {{1.0, 2.0, 0.5},   {0.5, 1.5, -3.0},  {3.6, 3.6, -10.0}, {-2.3, 1.7, 4.0},
                               {4.2, 7.4, -25.0}, {2.0, 0.6, -60.0}, {-1.6, -0.6, 2.0}, {9.0, 3.0, 15.0}};
    for (const auto& c : cases) {
        CAPTURE(c[0]);
        CAPTURE(c[1]);
        CAPTURE(c[2]);
        CHECK(kummer_m(c[0], c[1], c[2]) == doctest::Approx(oracle::kummer(c[0], c[1], c[2])).epsilon(1e-10));
    }
    // M(a, a, z) = e^z.
    for (double z : {-50.0, -3.0, 0.0, 2.5, 20.0}) CHECK(kummer_m(2.6, 2.6, z) == doctest::Approx(std::exp(z)).epsilon(1e-12));
    CHECK(kummer_m_series(1.0, 2.0, -4.0).transformed);
    CHECK_THROWS_AS(kummer_m(1.0, -2.0, 1.0), DomainError);
    CHECK_THROWS_AS(kummer_m(1.0, 2.0, 800.0), NumericalError);
}

TEST_CASE("eigenmode parameters")
{
    const double M = 1.6;
    for (int n : {1, 2}) {
        const EigenMode mode = eigenmode_params(n, M);
        const double omega = 2.0 * std::numbers::pi * n;
        const double root = std::sqrt((1.0 + M) * (1.0 + M) + 4.0 * omega);
        CHECK(mode.omega == omega);
        CHECK(mode.alpha_plus == (3.0 + M + root) / 2.0);
        CHECK(mode.alpha_minus == (3.0 + M - root) / 2.0);
        CHECK(mode.beta_plus == 1.0 + root);
        CHECK(mode.beta_minus == 1.0 - root);
    }
    // n = 0: root = 1 + M, so the parameters are exact.
    const EigenMode zero = eigenmode_params(0, M);
    CHECK(zero.omega == 0.0);
    CHECK(zero.alpha_plus == M + 2.0);
    CHECK(zero.beta_plus == M + 2.0);
    CHECK(zero.alpha_minus == 1.0);
    CHECK(zero.beta_minus == -M);
    CHECK_FALSE(zero.minus_branch_pole);
    CHECK(eigenmode_params(0, 3.0).minus_branch_pole);  // beta- = -3
}

TEST_CASE("n = 0 plus branch is the steady state")
{
    const double M = 1.6, c = 1.3;
    EigenMode mode = eigenmode_params(0, M);
    mode.c = c;
    mode.A2 = 1.0;
    const SteadyStateIPDF d(M, c);
    const double norm = c * std::tgamma(M + 1.0);
    for (double y : make_log_grid(0.005, 200.0, 60))
        CHECK(eigenmode_eval(mode, y) / norm == doctest::Approx(oracle::pdf(M, c, y)).epsilon(1e-10));
}

TEST_CASE("modes satisfy the Fokker-Planck eigen-equation with growth sign")
{
    const double M = 1.6, c = 1.0;
    const auto grid = make_log_grid(0.05, 20.0, 4000);
    for (int n : {1, 2}) {
        CAPTURE(n);
        EigenMode mode = eigenmode_params(n, M);
        mode.c = c;
        mode.A1 = 1.0;
        mode.A2 = 1.0;
        const OperatorResidual r = eigenmode_operator_residual(mode, M, c, grid);
        CHECK(r.growth < 1e-4);
        CHECK(r.decay > 0.1);
    }
}
