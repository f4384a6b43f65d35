#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "income/error.hpp"
#include "income/poverty.hpp"
#include "oracles.hpp"

using namespace income;

namespace {

MonodFit monod(double V, double K) { return MonodFit{V, K, 0.0, false}; }

BandedDistribution synthetic(double M, double C0, double offset, std::size_t bands, double V, double K,
                             std::uint64_t seed, double year = 2000.0)
{
    const SteadyStateIPDF d(M, C0, offset);
    return synth_round(d, quantile_edges(d, bands), 1000000, seed, {"r" + std::to_string(seed), year, MonodParams{V, K}});
}

}  // namespace

TEST_CASE("FGT indices on samples")
{
    const PovertyLine z(1.0);
    const std::vector<double> rich{1.0, 2.0, 5.0};
    const auto none = fgt_indices(rich, z);
    CHECK(none.hci == 0.0);
    CHECK(none.pg == 0.0);
    CHECK(none.spg == 0.0);

    const std::vector<double> pair{0.0, 1.0};
    const auto f = fgt_indices(pair, z);
    CHECK(f.hci == 0.5);
    CHECK(f.pg == 0.5);
    CHECK(f.spg == 0.5);

    CHECK_THROWS_AS(PovertyLine(0.0), ValidationError);
    CHECK_THROWS_AS(PovertyLine(-3.0), ValidationError);

    std::mt19937_64 gen(1);
    std::lognormal_distribution<double> ln(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> xs(100);
        for (auto& x : xs) x = ln(gen);
        const auto g = fgt_indices(xs, PovertyLine(0.5 + 0.05 * t));
        CHECK(g.hci >= g.pg);
        CHECK(g.pg >= g.spg);
    }
}

TEST_CASE("banded FGT indices track the continuous law")
{
    const double M = 1.6, C0 = 1.6;
    const auto r = synthetic(M, C0, 0.0, 40, 0.4, 0.5, 3);
    for (double zv : {0.3, 0.55, 0.8, 1.2}) {
        CAPTURE(zv);
        const auto f = fgt_indices(r, PovertyLine(zv));
        const double hci = oracle::cdf(M, C0, zv);
        const double pg = oracle::expectation(M, C0, [&](double y) { return y < zv ? (zv - y) / zv : 0.0; });
        const double spg =
            oracle::expectation(M, C0, [&](double y) { return y < zv ? std::pow((zv - y) / zv, 2) : 0.0; });
        CHECK(std::fabs(f.hci - hci) < 0.01);
        CHECK(std::fabs(f.pg - pg) < 0.01);
        CHECK(std::fabs(f.spg - spg) < 0.01);
        CHECK(f.hci >= f.pg);
        CHECK(f.pg >= f.spg);
    }
    // Line inside the open band uses the Pareto tail.
    const auto top = fgt_indices(r, PovertyLine(r.bands.back().lower * 2.0));
    CHECK(top.hci > 1.0 - r.bands.back().population_share);
    CHECK(top.hci < 1.0);
}

TEST_CASE("direct CD index")
{
    const MonodFit m = monod(0.4, 0.5);
    auto r = synthetic(1.6, 1.6, 0.15, 15, 0.4, 0.5, 4);
    CHECK(std::fabs(cd_index_direct(r, m) - cd_index_banded(r, m)) < 1e-10);

    auto saturated = r;
    for (auto& b : saturated.bands) b.mean_cereal_expenditure = 0.4;
    CHECK(cd_index_direct(saturated, m) == 0.0);
    auto starving = r;
    for (auto& b : starving.bands) b.mean_cereal_expenditure = 0.0;
    CHECK(cd_index_direct(starving, m) == doctest::Approx(0.4));
    auto over = r;
    for (auto& b : over.bands) b.mean_cereal_expenditure = 0.5;  // above V: no deprivation, never negative
    CHECK(cd_index_direct(over, m) == 0.0);

    r.bands[2].mean_cereal_expenditure.reset();
    CHECK_THROWS_AS(cd_index_direct(r, m), ValidationError);
}

TEST_CASE("model CD index")
{
    const SteadyStateIPDF d(1.6, 1.6);
    const double quad = cd_index_model(d, monod(1.0, 0.5));
    const double ref = oracle::expectation(1.6, 1.6, [](double y) { return 0.5 / (0.5 + y); });
    CHECK(quad == doctest::Approx(ref).epsilon(1e-9));

    // Offset enters as CD(y + offset).
    const SteadyStateIPDF shifted(1.6, 1.6, 0.15);
    CHECK(cd_index_model(shifted, monod(2.0, 0.5)) ==
          doctest::Approx(oracle::expectation(1.6, 1.6, [](double y) { return 1.0 / (0.65 + y); })).epsilon(1e-9));

    CHECK(cd_index_model(d, monod(1.0, 1e9)) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(cd_index_model(d, monod(1.0, 1e-9)) < 1e-8);
    CHECK(quad > 0.0);
    CHECK(quad < 1.0);

    // Shifting all incomes up lowers the index.
    CHECK(cd_index_model(SteadyStateIPDF(1.6, 1.6, 0.3), monod(1.0, 0.5)) < quad);
    CHECK_THROWS_AS(cd_index_model(d, monod(0.0, 0.5)), ValidationError);
}

TEST_CASE("model CD index on a grid density")
{
    const SteadyStateIPDF d(1.6, 1.6);
    auto g = sample_density(d, default_grid(1.6, 1.6, 4000));
    const double m = g.mass();
    for (double& v : g.values) v /= m;
    CHECK(cd_index_model(g, monod(1.0, 0.5)) == doctest::Approx(cd_index_model(d, monod(1.0, 0.5))).epsilon(1e-5));
    for (double& v : g.values) v *= 1.01;
    CHECK_THROWS_AS(cd_index_model(g, monod(1.0, 0.5)), ValidationError);
}

TEST_CASE("Monte Carlo cross-check of the model index")
{
    const SteadyStateIPDF d(1.6, 1.6);
    const auto ys = ipdf_sample(d, 10000000, 12);
    double s = 0.0, s2 = 0.0;
    for (double y : ys) {
        const double c = 0.5 / (0.5 + y);
        s += c;
        s2 += c * c;
    }
    const double n = static_cast<double>(ys.size());
    const double mc = s / n;
    const double se = std::sqrt((s2 / n - mc * mc) / n);
    CHECK(std::fabs(cd_index_model(d, monod(1.0, 0.5)) - mc) < 3.0 * se);
}

TEST_CASE("Sen axioms")
{
    const std::vector<double> ys{0.2, 0.4, 0.7, 1.5, 3.0};
    IndexChoice pg{IndexKind::pg, 1.0, {}};
    CHECK(sen_axiom_check(ys, pg, Reduce{1, 0.01}).pass);

    IndexChoice pcd{IndexKind::pcd, 0.0, monod(1.0, 0.5)};
    CHECK(sen_axiom_check(ys, pcd, Transfer{0, 3, 0.1}).pass);
    CHECK(sen_axiom_check(ys, pcd, Reduce{4, 0.5}).pass);

    // HCI ignores a transfer that moves nobody across the line.
    IndexChoice hci{IndexKind::hci, 1.0, {}};
    const auto insensitive = sen_axiom_check(ys, hci, Transfer{0, 2, 0.05});
    CHECK_FALSE(insensitive.pass);
    CHECK(insensitive.before == insensitive.after);
    CHECK(insensitive.witness.find("hci") != std::string::npos);

    IndexChoice spg{IndexKind::spg, 1.0, {}};
    CHECK(sen_axiom_check(ys, spg, Transfer{0, 1, 0.1}).pass);

    // Preconditions.
    CHECK_THROWS_AS(sen_axiom_check(ys, pg, Reduce{3, 0.1}), ValidationError);       // above the line
    CHECK_THROWS_AS(sen_axiom_check(ys, pg, Transfer{1, 0, 0.1}), ValidationError);  // recipient poorer
    CHECK_THROWS_AS(sen_axiom_check(ys, pg, Transfer{0, 0, 0.1}), ValidationError);
    CHECK_THROWS_AS(sen_axiom_check(ys, pg, Reduce{0, 0.0}), ValidationError);
    CHECK_THROWS_AS(sen_axiom_check(ys, pg, Reduce{0, 0.5}), ValidationError);       // more than income
    CHECK_THROWS_AS(sen_axiom_check(ys, pg, Reduce{9, 0.1}), ValidationError);
}

TEST_CASE("index series")
{
    FitOptions o;
    o.fix_offset = 0.15;

    SUBCASE("constant economy gives constant indices")
    {
        std::vector<BandedDistribution> rounds;
        std::vector<FitResult> fits;
        std::vector<MonodFit> monods;
        for (int k = 0; k < 3; ++k) {
            rounds.push_back(synthetic(1.6, 1.6, 0.15, 20, 0.4, 0.5, 7, 1990.0 + k));
            fits.push_back(fit_ipdf(rounds.back(), o));
            monods.push_back(fit_monod(rounds.back()));
        }
        const auto s = index_series(rounds, fits, monods, PovertyLine(0.8));
        REQUIRE(s.rows.size() == 3);
        for (const auto& row : s.rows) {
            CHECK(row.hci == s.rows[0].hci);
            CHECK(row.pcd_direct == s.rows[0].pcd_direct);
            CHECK(row.pcd_model == doctest::Approx(s.rows[0].pcd_model).epsilon(1e-12));
            CHECK(row.pg <= row.hci);
            CHECK(row.spg <= row.pg);
        }
        const std::string csv = format_index_series(s);
        CHECK(csv.rfind("round_id,year,hci,pg,spg,pcd_direct,pcd_model\n", 0) == 0);
        CHECK_THROWS_AS(index_series(rounds, std::span(fits).first(2), monods, PovertyLine(0.8)), ValidationError);
    }

    SUBCASE("rising income lowers every index")
    {
        std::vector<BandedDistribution> rounds;
        std::vector<FitResult> fits;
        std::vector<MonodFit> monods;
        for (int k = 0; k < 4; ++k) {
            rounds.push_back(synthetic(1.6, 1.6 * (1.0 + 0.2 * k), 0.15, 20, 0.4, 0.5, 20 + k, 1990.0 + k));
            fits.push_back(fit_ipdf(rounds.back(), o));
            monods.push_back(fit_monod(rounds.back()));
        }
        const auto s = index_series(rounds, fits, monods, PovertyLine(0.8));
        for (std::size_t k = 1; k < s.rows.size(); ++k) {
            CHECK(s.rows[k].hci <= s.rows[k - 1].hci);
            CHECK(s.rows[k].pg <= s.rows[k - 1].pg);
            CHECK(s.rows[k].spg <= s.rows[k - 1].spg);
            CHECK(s.rows[k].pcd_direct <= s.rows[k - 1].pcd_direct);
            CHECK(s.rows[k].pcd_model <= s.rows[k - 1].pcd_model);
        }
    }
}
