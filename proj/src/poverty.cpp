#include "income/poverty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "income/error.hpp"
#include "income/io.hpp"

namespace income {

PovertyLine::PovertyLine(double z_) : z(z_)
{
    if (!(z > 0.0) || !std::isfinite(z)) throw ValidationError("poverty line must be positive and finite");
}

FgtIndices fgt_indices(std::span<const double> incomes, PovertyLine line)
{
    if (incomes.empty()) throw ValidationError("fgt: empty income sample");
    FgtIndices r;
    for (double y : incomes) {
        if (y < line.z) {
            const double g = (line.z - y) / line.z;
            r.hci += 1.0;
            r.pg += g;
            r.spg += g * g;
        }
    }
    const double n = static_cast<double>(incomes.size());
    r.hci /= n;
    r.pg /= n;
    r.spg /= n;
    return r;
}

FgtIndices fgt_indices(const BandedDistribution& round, PovertyLine line)
{
    const double z = line.z;
    FgtIndices r;
    for (const Band& b : round.bands) {
        if (b.population_share == 0.0 || b.lower >= z) continue;
        const double w = b.population_share;
        if (!b.open()) {
            // Uniform density on [l, u]; integrate the gap over [l, min(u, z)].
            const double l = b.lower;
            const double u = std::min(b.upper, z);
            const double width = b.width();
            const double g_l = (z - l) / z;
            const double g_u = (z - u) / z;
            r.hci += w * (u - l) / width;
            r.pg += w * z * (g_l * g_l - g_u * g_u) / (2.0 * width);
            r.spg += w * z * (g_l * g_l * g_l - g_u * g_u * g_u) / (3.0 * width);
            continue;
        }
        // Open band: Pareto density share (a-1)/L (y/L)^-a on [L, inf).
        const double L = b.lower;
        const double a = open_band_exponent(round);
        auto density = [&](double y) { return w * (a - 1.0) / L * std::pow(y / L, -a); };
        using boost::math::quadrature::gauss_kronrod;
        r.hci += w * (1.0 - std::pow(z / L, 1.0 - a));
        r.pg += gauss_kronrod<double, 31>::integrate([&](double y) { return (z - y) / z * density(y); }, L, z, 10,
                                                     1e-13);
        r.spg += gauss_kronrod<double, 31>::integrate(
            [&](double y) {
                const double g = (z - y) / z;
                return g * g * density(y);
            },
            L, z, 10, 1e-13);
    }
    return r;
}

double consumption_deprivation(double y, const MonodFit& monod) { return monod.V * monod.K / (monod.K + y); }

namespace {

void check_monod(const MonodFit& monod)
{
    if (!(monod.V > 0.0) || !(monod.K > 0.0) || !std::isfinite(monod.V) || !std::isfinite(monod.K))
        throw ValidationError("CD index: V and K must be positive and finite");
}

}  // namespace

double cd_index_direct(const BandedDistribution& round, const MonodFit& monod)
{
    check_monod(monod);
    double p = 0.0;
    for (std::size_t b = 0; b < round.bands.size(); ++b) {
        const Band& band = round.bands[b];
        if (!band.mean_cereal_expenditure)
            throw ValidationError("CD index: round '" + round.round_id + "' lacks cereal expenditure in band " +
                                  std::to_string(b));
        p += band.population_share * std::max(0.0, monod.V - *band.mean_cereal_expenditure);
    }
    return p;
}

double cd_index_banded(const BandedDistribution& round, const MonodFit& monod)
{
    check_monod(monod);
    double p = 0.0;
    for (std::size_t b = 0; b < round.bands.size(); ++b)
        p += round.bands[b].population_share * consumption_deprivation(representative_income(round, b), monod);
    return p;
}

double cd_index_sample(std::span<const double> incomes, const MonodFit& monod)
{
    check_monod(monod);
    if (incomes.empty()) throw ValidationError("CD index: empty income sample");
    double p = 0.0;
    for (double y : incomes) p += consumption_deprivation(y, monod);
    return p / static_cast<double>(incomes.size());
}

double cd_index_model(const SteadyStateIPDF& dist, const MonodFit& monod)
{
    check_monod(monod);
    // With u = C0 / y, f(y) dy becomes the Gamma(M+1) density in u and
    // CD(y + offset) = V K u / ((K + offset) u + C0).
    const double a = dist.shape() + 1.0;
    const double k_obs = monod.K + dist.offset();
    const double log_norm = -std::lgamma(a);
    auto integrand = [&](double u) {
        if (u <= 0.0) return 0.0;
        const double g = std::exp(dist.shape() * std::log(u) - u + log_norm);
        return monod.V * monod.K * u / (k_obs * u + dist.scale()) * g;
    };
    using boost::math::quadrature::gauss_kronrod;
    double err = 0.0;
    // Split at the Gamma mode so both pieces are smooth and well scaled.
    const double mid = std::max(dist.shape(), 1.0);
    const double left = gauss_kronrod<double, 61>::integrate(integrand, 0.0, mid, 15, 1e-13, &err);
    double err2 = 0.0;
    const double right = gauss_kronrod<double, 61>::integrate(
        integrand, mid, std::numeric_limits<double>::infinity(), 15, 1e-13, &err2);
    const double value = left + right;
    if (err + err2 > 1e-9) throw NumericalError("CD index quadrature did not reach 1e-9");
    return value;
}

double cd_index_model(const GridDensity& density, const MonodFit& monod, double offset)
{
    check_monod(monod);
    const double mass = density.mass();
    if (std::fabs(mass - 1.0) > 1e-6)
        throw ValidationError("CD index: density mass " + io::format_number(mass) + " is not 1 within 1e-6");
    const auto w = cell_widths(density.grid);
    double p = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j)
        p += w[j] * density.values[j] * consumption_deprivation(density.grid[j] + offset, monod);
    return p;
}

IndexSeries index_series(std::span<const BandedDistribution> rounds, std::span<const FitResult> fits,
                         std::span<const MonodFit> monods, PovertyLine line, Diagnostics* diag)
{
    if (rounds.empty()) throw ValidationError("index series: no rounds");
    if (fits.size() != rounds.size() || monods.size() != rounds.size())
        throw ValidationError("index series: " + std::to_string(rounds.size()) + " rounds but " +
                              std::to_string(fits.size()) + " fits and " + std::to_string(monods.size()) +
                              " Monod fits");

    const PiecewiseLinear labour = labour_rate_series(rounds, fits, diag);
    double M = 0.0;
    for (const auto& f : fits) M += f.M / static_cast<double>(fits.size());

    IndexSeries series;
    series.poverty_line = line.z;
    for (std::size_t i = 0; i < rounds.size(); ++i) {
        const BandedDistribution& round = rounds[i];
        IndexRow row;
        row.round_id = round.round_id;
        row.year = round.year;
        const FgtIndices fgt = fgt_indices(round, line);
        row.hci = fgt.hci;
        row.pg = fgt.pg;
        row.spg = fgt.spg;
        row.monod = monods[i];
        row.pcd_direct = cd_index_direct(round, monods[i]);
        row.pcd_banded = cd_index_banded(round, monods[i]);
        row.M = M;
        row.C = labour(round.year);
        row.offset = fits[i].offset;
        row.pcd_model = cd_index_model(SteadyStateIPDF(M, row.C, row.offset), monods[i]);
        if (diag && monods[i].at_boundary)
            diag->warn("index series: Monod K for round '" + round.round_id + "' hit its search boundary");
        series.rows.push_back(std::move(row));
    }
    return series;
}

std::string format_index_series(const IndexSeries& series)
{
    io::CsvWriter csv({"round_id", "year", "hci", "pg", "spg", "pcd_direct", "pcd_model"});
    using io::format_number;
    for (const auto& r : series.rows)
        csv.row({r.round_id, format_number(r.year), format_number(r.hci), format_number(r.pg), format_number(r.spg),
                 format_number(r.pcd_direct), format_number(r.pcd_model)});
    return csv.str();
}

// ---------------------------------------------------------------------------
// Sen's axioms

std::string to_string(IndexKind kind)
{
    switch (kind) {
    case IndexKind::hci: return "hci";
    case IndexKind::pg: return "pg";
    case IndexKind::spg: return "spg";
    case IndexKind::pcd: return "pcd";
    }
    return "?";
}

double index_value(std::span<const double> incomes, const IndexChoice& index)
{
    if (index.kind == IndexKind::pcd) return cd_index_sample(incomes, index.monod);
    const FgtIndices f = fgt_indices(incomes, PovertyLine(index.z));
    switch (index.kind) {
    case IndexKind::hci: return f.hci;
    case IndexKind::pg: return f.pg;
    default: return f.spg;
    }
}

namespace {

void check_person(std::span<const double> incomes, std::size_t i, const char* role)
{
    if (i >= incomes.size())
        throw ValidationError(std::string("axiom check: ") + role + " index " + std::to_string(i) + " out of range");
}

void check_below_line(double y, const IndexChoice& index, const char* role)
{
    if (index.kind != IndexKind::pcd && !(y < index.z))
        throw ValidationError(std::string("axiom check: ") + role + " income " + io::format_number(y) +
                              " is not below the poverty line " + io::format_number(index.z));
}

}  // namespace

AxiomCheck sen_axiom_check(std::span<const double> incomes, const IndexChoice& index, const Perturbation& perturbation)
{
    std::vector<double> after(incomes.begin(), incomes.end());
    std::ostringstream what;
    what.precision(12);
    if (const auto* r = std::get_if<Reduce>(&perturbation)) {
        check_person(incomes, r->person, "person");
        const double y = incomes[r->person];
        check_below_line(y, index, "reduced");
        if (!(r->delta > 0.0) || r->delta > y)
            throw ValidationError("axiom check: reduction must satisfy 0 < delta <= income");
        after[r->person] = y - r->delta;
        what << "reduce person " << r->person << " from " << y << " by " << r->delta;
    } else {
        const auto& t = std::get<Transfer>(perturbation);
        check_person(incomes, t.from, "donor");
        check_person(incomes, t.to, "recipient");
        const double yf = incomes[t.from];
        const double yt = incomes[t.to];
        check_below_line(yf, index, "donor");
        if (t.from == t.to || !(yt > yf))
            throw ValidationError("axiom check: recipient must be strictly richer than the donor");
        if (!(t.delta > 0.0) || t.delta > yf)
            throw ValidationError("axiom check: transfer must satisfy 0 < delta <= donor income");
        after[t.from] = yf - t.delta;
        after[t.to] = yt + t.delta;
        what << "transfer " << t.delta << " from person " << t.from << " (" << yf << ") to person " << t.to << " ("
             << yt << ")";
    }

    AxiomCheck out;
    out.before = index_value(incomes, index);
    out.after = index_value(after, index);
    out.pass = out.after - out.before > 1e-12;
    what << "; " << to_string(index.kind) << " " << out.before << " -> " << out.after;
    out.witness = what.str();
    return out;
}

}  // namespace income
