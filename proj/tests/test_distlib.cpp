#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include <omp.h>

#include "income/distlib.hpp"
#include "income/error.hpp"
#include "income/simulate.hpp"
#include "oracles.hpp"

using namespace income;

TEST_CASE("parameters are validated")
{
    CHECK_THROWS_AS(SteadyStateIPDF(0.0, 1.0), ValidationError);
    CHECK_THROWS_AS(SteadyStateIPDF(1.6, -1.0), ValidationError);
    CHECK_THROWS_AS(SteadyStateIPDF(1.6, 1.6, -0.1), ValidationError);
    const SteadyStateIPDF d(1.6, 2.0, 0.15);
    CHECK(d.shape() == 1.6);
    CHECK(d.scale() == 2.0);
    CHECK(d.offset() == 0.15);
}

TEST_CASE("density and CDF match the inverse gamma law")
{
    for (auto [M, C0] : {std::pair{1.6, 1.6}, {0.5, 3.0}, {3.0, 2.0}, {8.0, 0.2}}) {
        const SteadyStateIPDF d(M, C0);
        for (double r : {0.05, 0.2, 0.5, 1.0, 2.0, 5.0, 20.0, 300.0}) {
            const double y = r * C0 / M;
            CAPTURE(M);
            CAPTURE(y);
            CHECK(ipdf_density(d, y) == doctest::Approx(oracle::pdf(M, C0, y)).epsilon(1e-12));
            CHECK(ipdf_cdf(d, y) == doctest::Approx(oracle::cdf(M, C0, y)).epsilon(1e-10));
            CHECK(ipdf_survival(d, y) == doctest::Approx(1.0 - oracle::cdf(M, C0, y)).epsilon(1e-9));
        }
        CHECK_THROWS_AS(ipdf_density(d, 0.0), DomainError);
        CHECK_THROWS_AS(ipdf_density(d, -1.0), DomainError);
        CHECK_THROWS_AS(ipdf_cdf(d, 0.0), DomainError);
    }
}

TEST_CASE("density integrates to one")
{
    for (auto [M, C0] : {std::pair{1.6, 1.6}, {0.7, 0.4}, {4.0, 10.0}}) {
        const SteadyStateIPDF d(M, C0);
        CHECK(oracle::expectation(M, C0, [](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-10));
        // Same integral through the library's own density.
        boost::math::quadrature::exp_sinh<double> integ;
        CHECK(integ.integrate([&](double y) { return ipdf_density(d, y); }, 0.0, oracle::inf) ==
              doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("mean, mode and moments")
{
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> um(0.5, 4.0), uc(0.2, 5.0);
    for (int i = 0; i < 20; ++i) {
        const double M = um(gen), C0 = uc(gen);
        const SteadyStateIPDF d(M, C0);
        CHECK(ipdf_mean(d) == doctest::Approx(oracle::mean_by_quadrature(M, C0)).epsilon(1e-8));
    }
    const SteadyStateIPDF d(1.6, 1.6);
    CHECK(ipdf_mode(d) == doctest::Approx(1.6 / 3.6));
    CHECK(ipdf_moment(d, 1).value == doctest::Approx(1.0));
    CHECK_FALSE(ipdf_moment(d, 1).divergent);
    CHECK(ipdf_moment(d, 2).value ==
          doctest::Approx(oracle::expectation(1.6, 1.6, [](double y) { return y * y; })).epsilon(1e-8));
    CHECK(ipdf_moment(d, 3).divergent);  // 3 >= M + 1
    const SteadyStateIPDF thin(3.0, 2.0);
    CHECK(ipdf_moment(thin, 2).value == doctest::Approx(oracle::expectation(3.0, 2.0, [](double y) { return y * y; })));
    CHECK(ipdf_moment(thin, 4).divergent);
}

TEST_CASE("quantile inverts the CDF")
{
    const SteadyStateIPDF d(1.6, 1.6);
    for (double p : {1e-6, 0.01, 0.25, 0.5, 0.9, 0.999, 1 - 1e-7}) {
        const double y = ipdf_quantile(d, p);
        CHECK(oracle::cdf(1.6, 1.6, y) == doctest::Approx(p).epsilon(1e-9));
    }
    CHECK_THROWS_AS(ipdf_quantile(d, 0.0), ValidationError);
    CHECK_THROWS_AS(ipdf_quantile(d, 1.0), ValidationError);
}

TEST_CASE("sampling follows the law and ignores the thread count")
{
    const SteadyStateIPDF d(1.6, 1.6);
    const auto xs = ipdf_sample(d, 200000, 3);
    CHECK(ks_distance(xs, d) < 1.63 / std::sqrt(200000.0));
    double g = 0.0;
    for (double y : xs) g += 1.6 / y;
    CHECK(g / xs.size() == doctest::Approx(2.6).epsilon(0.01));  // C0 / Y ~ Gamma(M+1)

    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto one = ipdf_sample(d, 10000, 99);
    omp_set_num_threads(4);
    const auto four = ipdf_sample(d, 10000, 99);
    omp_set_num_threads(saved);
    CHECK(one == four);
    CHECK(ipdf_sample(d, 10000, 100) != one);
}
