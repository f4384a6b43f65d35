#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "income/error.hpp"
#include "income/survey.hpp"
#include "oracles.hpp"

using namespace income;

namespace {

constexpr const char* kHeader =
    "round_id,year,band_lower,band_upper,population_share,mean_total_expenditure,mean_cereal_expenditure\n";

std::string ten_band_file()
{
    std::string s = kHeader;
    const double edges[] = {0, 20, 30, 40, 50, 60, 80, 100, 150, 250};
    const double shares[] = {0.05, 0.1, 0.15, 0.15, 0.15, 0.15, 0.1, 0.08, 0.05, 0.02};
    for (int b = 0; b < 10; ++b) {
        const std::string upper = b == 9 ? "inf" : std::to_string(edges[b + 1]);
        const double mid = b == 9 ? 320.0 : 0.5 * (edges[b] + edges[b + 1]);
        s += "r1,1974," + std::to_string(edges[b]) + "," + upper + "," + std::to_string(shares[b]) + "," +
             std::to_string(mid) + "," + std::to_string(0.3 * mid) + "\n";
    }
    return s;
}

double total_share(const BandedDistribution& r)
{
    double s = 0.0;
    for (const auto& b : r.bands) s += b.population_share;
    return s;
}

}  // namespace

TEST_CASE("well-formed file loads")
{
    Diagnostics diag;
    const auto rounds = parse_rounds(ten_band_file(), "ten.csv", &diag);
    REQUIRE(rounds.size() == 1);
    CHECK(rounds[0].round_id == "r1");
    CHECK(rounds[0].year == 1974);
    CHECK(rounds[0].bands.size() == 10);
    CHECK(rounds[0].bands.back().open());
    CHECK(total_share(rounds[0]) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(diag.warnings.empty());
}

TEST_CASE("rejections name the offending rows")
{
    std::string overlap = std::string(kHeader) + "r,1974,0,10,0.5,5,\nr,1974,8,inf,0.5,20,\n";
    try {
        parse_rounds(overlap, "o.csv");
        FAIL("expected rejection");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("overlap") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_rounds(std::string(kHeader) + "r,1974,0,10,0.5,,\nr,1974,12,inf,0.5,,\n", "g"), ValidationError);
    CHECK_THROWS_AS(parse_rounds(std::string(kHeader) + "r,1974,0,10,0.5,5,6\nr,1974,10,inf,0.5,20,\n", "c"),
                    ValidationError);  // cereal > total
    CHECK_THROWS_AS(parse_rounds(std::string(kHeader) + "r,1974,0,inf,0.5,,\nr,1974,10,20,0.5,,\n", "o"),
                    ValidationError);  // open band not last
    CHECK_THROWS_AS(parse_rounds(std::string(kHeader) + "r,1974,0,10,1.5,,\n", "s"), ValidationError);
    CHECK_THROWS_AS(parse_rounds(std::string(kHeader) + "r,1974,0,10,0.5\n", "w"), ValidationError);
    CHECK_THROWS_AS(parse_rounds("round_id,year\nr,1974\n", "h"), ValidationError);
}

TEST_CASE("share tolerance policy")
{
    const std::string near = std::string(kHeader) + "r,1974,0,10,0.4995,,\nr,1974,10,inf,0.5,,\n";
    Diagnostics diag;
    const auto r = parse_rounds(near, "n", &diag);
    CHECK(total_share(r[0]) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(diag.warnings.size() == 1);

    Diagnostics quiet;
    parse_rounds(std::string(kHeader) + "r,1974,0,10,0.4999999,,\nr,1974,10,inf,0.5,,\n", "q", &quiet);
    CHECK(quiet.warnings.empty());

    CHECK_THROWS_AS(parse_rounds(std::string(kHeader) + "r,1974,0,10,0.49,,\nr,1974,10,inf,0.5,,\n", "x"),
                    ValidationError);
}

TEST_CASE("several rounds, shuffled rows and CSV round trip")
{
    std::string s = std::string(kHeader) + "b,1983,10,inf,0.4,30,\na,1974,0,10,0.5,5,\nb,1983,0,10,0.6,4,\n" +
                    "a,1974,10,inf,0.5,25,\n";
    const auto rounds = parse_rounds(s, "multi");
    REQUIRE(rounds.size() == 2);
    CHECK(rounds[0].round_id == "b");
    CHECK(rounds[0].bands[0].lower == 0.0);
    const auto again = parse_rounds(format_rounds(rounds), "again");
    REQUIRE(again.size() == 2);
    CHECK(again[1].bands[1].mean_total_expenditure == 25.0);
    CHECK_FALSE(again[1].bands[1].mean_cereal_expenditure.has_value());
    CHECK_THROWS_AS(parse_rounds(std::string(kHeader) + "a,1974,0,10,0.5,,\na,1975,10,inf,0.5,,\n", "y"),
                    ValidationError);
}

TEST_CASE("deflation is a linear map")
{
    const auto round = parse_rounds(ten_band_file(), "t")[0];
    const auto table = parse_deflators("year,cpi\n1974,50\n1984,100\n1994,200\n", 1984);
    CHECK(table.ratio(1984) == 1.0);
    CHECK(table.ratio(1974) == 2.0);
    CHECK(table.cpi_at(1979) == doctest::Approx(75.0));

    const auto deflated = deflate(round, table);
    for (std::size_t b = 0; b < round.bands.size(); ++b) {
        CHECK(deflated.bands[b].lower == 2.0 * round.bands[b].lower);
        CHECK(deflated.bands[b].population_share == round.bands[b].population_share);
    }
    CHECK(mean_income(deflated) == doctest::Approx(2.0 * mean_income(round)).epsilon(1e-14));

    const auto back = inflate(deflated, table);
    for (std::size_t b = 0; b < round.bands.size(); ++b) {
        CHECK(std::fabs(back.bands[b].lower - round.bands[b].lower) <= 1e-12 * (1.0 + round.bands[b].lower));
        CHECK(std::fabs(*back.bands[b].mean_total_expenditure - *round.bands[b].mean_total_expenditure) <=
              1e-12 * *round.bands[b].mean_total_expenditure);
    }

    const auto identity = parse_deflators("year,cpi\n1974,80\n", 1974);
    CHECK(deflate(round, identity).bands[3].upper == round.bands[3].upper);

    auto late = round;
    late.year = 2001;
    CHECK_THROWS_AS(deflate(late, table), ValidationError);
    CHECK_THROWS_AS(parse_deflators("year,cpi\n1974,50\n", 1990), ValidationError);
    CHECK_THROWS_AS(parse_deflators("year,cpi\n1974,-5\n", 1974), ValidationError);
}

TEST_CASE("collapse rescaling")
{
    const auto round = parse_rounds(ten_band_file(), "t")[0];
    const double m = mean_income(round);
    const auto same = collapse_rescale(round, m);
    CHECK(same.bands[4].lower == doctest::Approx(round.bands[4].lower).epsilon(1e-15));
    const auto rupees = collapse_rescale(round, 64.84);
    CHECK(mean_income(rupees) == doctest::Approx(64.84).epsilon(1e-13));
    CHECK_THROWS_AS(collapse_rescale(round, 0.0), ValidationError);

    // Two rounds from one shape at different scales collapse onto one curve.
    const SteadyStateIPDF small(1.6, 1.6), large(1.6, 5.0);
    const auto ra = synth_round(small, quantile_edges(small, 15), 200000, 1);
    const auto rb = synth_round(large, quantile_edges(small, 15), 200000, 2);
    const auto ca = collapse_rescale(ra, 1.0), cb = collapse_rescale(rb, 1.0);
    const EmpiricalCdf fa(ca), fb(cb);
    double max_share = 0.0;
    for (const auto& b : rb.bands) max_share = std::max(max_share, b.population_share);
    for (double x : {0.2, 0.5, 0.8, 1.0, 1.5, 2.5, 4.0}) CHECK(std::fabs(fa(x) - fb(x)) < max_share);
}

TEST_CASE("empirical CDF and IPDF")
{
    const auto round = parse_rounds(ten_band_file(), "t")[0];
    const EmpiricalCdf cdf(round);
    CHECK(cdf(250.0) == doctest::Approx(1.0 - 0.02));
    CHECK(cdf(0.0) == 0.0);
    CHECK(cdf(25.0) == doctest::Approx(0.05 + 0.05));
    double prev = 0.0;
    for (double y = 0.0; y < 2000.0; y += 0.7) {
        const double v = cdf(y);
        CHECK(v >= prev);
        CHECK(v <= 1.0);
        prev = v;
    }

    const PiecewiseDensity pdf = empirical_ipdf(round);
    double mass = pdf.open_share;
    for (const auto& s : pdf.segments) mass += s.density * (s.upper - s.lower);
    CHECK(mass == doctest::Approx(1.0));
    boost::math::quadrature::exp_sinh<double> integ;
    CHECK(integ.integrate([&](double y) { return pdf(y + 250.0); }, 0.0, oracle::inf) == doctest::Approx(0.02));
    CHECK(pdf.open_effective_width() > 0.0);

    BandedDistribution single;
    single.bands.push_back({0.0, 10.0, 1.0, {}, {}, 0});
    CHECK_THROWS_AS(EmpiricalCdf{single}, ValidationError);
    CHECK_THROWS_AS(empirical_ipdf(single), ValidationError);

    // Synthetic data: the interpolation stays between the exact edge values,
    // so its error is below the largest band share.
    const SteadyStateIPDF d(1.6, 1.6);
    const auto synth = synth_round(d, quantile_edges(d, 20), 1000000, 6);
    const EmpiricalCdf scdf(synth);
    double max_share = 0.0;
    for (const auto& b : synth.bands) max_share = std::max(max_share, b.population_share);
    double sup = 0.0;
    for (double y = 0.01; y < 30.0; y *= 1.05) sup = std::max(sup, std::fabs(scdf(y) - oracle::cdf(1.6, 1.6, y)));
    CHECK(sup < max_share);
}

TEST_CASE("representative incomes")
{
    std::string s = std::string(kHeader) + "r,1,0,10,0.5,,\nr,1,10,20,0.3,,\nr,1,20,40,0.0375,,\nr,1,40,inf,0.1625,,\n";
    const auto r = parse_rounds(s, "rep")[0];
    CHECK(representative_income(r, 0) == 5.0);
    CHECK(representative_income(r, 2) == 30.0);
    const double a = open_band_exponent(r);
    CHECK(a == doctest::Approx(4.0));
    CHECK(representative_income(r, 3) == doctest::Approx(60.0));
}

TEST_CASE("synthetic rounds")
{
    const SteadyStateIPDF d(1.6, 1.6, 0.15);
    const auto edges = quantile_edges(d, 12);
    const std::uint64_t n = 10000000;
    const auto round = synth_round(d, edges, n, 17, {"s", 1990.0, MonodParams{0.4, 0.5}});
    CHECK(round.sample_size == n);
    CHECK(round.year == 1990.0);
    for (std::size_t b = 0; b < round.bands.size(); ++b) {
        const Band& band = round.bands[b];
        const double p = oracle::band_probability(1.6, 1.6, 0.15, band.lower, band.upper);
        CAPTURE(b);
        CHECK(std::fabs(band.population_share - p) < 4.0 * std::sqrt(p * (1.0 - p) / n));
        REQUIRE(band.mean_total_expenditure.has_value());
        CHECK(*band.mean_total_expenditure >= band.lower);
        if (!band.open()) {
            CHECK(*band.mean_total_expenditure <= band.upper);
            // Conditional mean by quadrature over the band.
            boost::math::quadrature::tanh_sinh<double> integ;
            const double lo = std::max(band.lower - 0.15, 0.0), hi = band.upper - 0.15;
            const double num = integ.integrate([](double y) { return y * oracle::pdf(1.6, 1.6, y); }, lo, hi);
            CHECK(*band.mean_total_expenditure == doctest::Approx(0.15 + num / p).epsilon(1e-8));
        }
        const double y = *band.mean_total_expenditure;
        CHECK(*band.mean_cereal_expenditure == doctest::Approx(0.4 * y / (0.5 + y)).epsilon(1e-14));
    }
    CHECK_THROWS_AS(synth_round(d, edges, 0, 1), ValidationError);
    // Cereal above total expenditure in the poorest band.
    CHECK_THROWS_AS(synth_round(d, edges, 1000, 1, {"s", 1990.0, MonodParams{1.0, 0.5}}), ValidationError);
    CHECK_THROWS_AS(synth_round(d, std::vector<double>{1.0, 0.5}, 10, 1), ValidationError);

    // Heavy tail: the open band has no finite mean when M <= 1.
    const SteadyStateIPDF heavy(0.8, 1.0);
    const auto hr = synth_round(heavy, quantile_edges(heavy, 5), 1000, 1);
    CHECK_FALSE(hr.bands.back().mean_total_expenditure.has_value());
}

TEST_CASE("model income mapping")
{
    const std::vector<double> x{0.1, 0.15, 0.2, 1.0};
    const auto m = to_model_incomes(x, 0.15);
    CHECK(m.clamped == 2);
    CHECK(m.values[0] == 1e-6);
    CHECK(m.values[3] == doctest::Approx(0.85));
}
