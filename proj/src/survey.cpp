#include "income/survey.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "income/error.hpp"
#include "income/io.hpp"
#include "income/rng.hpp"
#include "income/special.hpp"

namespace income {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEdgeTolerance = 1e-9;

std::string row_label(const Band& band, std::size_t index)
{
    if (band.source_line > 0) return "line " + std::to_string(band.source_line);
    return "band " + std::to_string(index);
}

std::string interval(const Band& band)
{
    return "[" + io::format_number(band.lower) + ", " + io::format_number(band.upper) + ")";
}

}  // namespace

bool Band::open() const noexcept { return std::isinf(upper); }

void validate_round(BandedDistribution& round, Diagnostics* diag)
{
    const std::string where = "round '" + round.round_id + "'";
    if (round.bands.empty()) throw ValidationError(where + ": no bands");
    for (std::size_t i = 0; i < round.bands.size(); ++i) {
        const Band& b = round.bands[i];
        const std::string at = where + " " + row_label(b, i);
        if (!(b.lower >= 0.0) || !std::isfinite(b.lower)) throw ValidationError(at + ": lower edge must be finite and >= 0");
        if (!(b.upper > b.lower)) throw ValidationError(at + ": upper edge must exceed lower edge " + interval(b));
        if (b.open() && i + 1 != round.bands.size()) throw ValidationError(at + ": only the last band may be open");
        if (!(b.population_share >= 0.0 && b.population_share <= 1.0))
            throw ValidationError(at + ": population share must lie in [0, 1]");
        if (b.mean_total_expenditure && !(*b.mean_total_expenditure > 0.0))
            throw ValidationError(at + ": mean total expenditure must be positive");
        if (b.mean_cereal_expenditure) {
            if (!(*b.mean_cereal_expenditure >= 0.0))
                throw ValidationError(at + ": mean cereal expenditure must be >= 0");
            if (b.mean_total_expenditure && *b.mean_cereal_expenditure > *b.mean_total_expenditure)
                throw ValidationError(at + ": cereal expenditure exceeds total expenditure");
        }
        if (i > 0) {
            const Band& prev = round.bands[i - 1];
            const double tol = kEdgeTolerance * std::max(1.0, std::fabs(b.lower));
            if (prev.upper > b.lower + tol) {
                throw ValidationError(where + ": " + row_label(prev, i - 1) + " and " + row_label(b, i) + " overlap: " +
                                      interval(prev) + " vs " + interval(b));
            }
            if (prev.upper < b.lower - tol) {
                throw ValidationError(where + ": gap between " + row_label(prev, i - 1) + " and " + row_label(b, i) +
                                      ": " + interval(prev) + " vs " + interval(b));
            }
        }
    }
    double total = 0.0;
    for (const Band& b : round.bands) total += b.population_share;
    const double err = std::fabs(total - 1.0);
    if (err > 1e-3)
        throw ValidationError(where + ": population shares sum to " + io::format_number(total) + " (tolerance 1e-3)");
    if (err > 1e-6 && diag)
        diag->warn(where + ": population shares sum to " + io::format_number(total) + "; renormalized");
    if (total != 1.0)
        for (Band& b : round.bands) b.population_share /= total;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::optional<double> optional_number(const std::string& field, const std::string& context)
{
    const double v = io::parse_number(field, context);
    if (std::isnan(v)) return std::nullopt;
    return v;
}

}  // namespace

std::vector<BandedDistribution> parse_rounds(std::string_view csv_text, std::string_view source_name, Diagnostics* diag)
{
    const io::CsvTable table = io::parse_csv(csv_text, source_name);
    const auto c_id = table.column("round_id");
    const auto c_year = table.column("year");
    const auto c_lower = table.column("band_lower");
    const auto c_upper = table.column("band_upper");
    const auto c_share = table.column("population_share");
    const auto c_total = table.column("mean_total_expenditure");
    const auto c_cereal = table.column("mean_cereal_expenditure");

    std::vector<BandedDistribution> rounds;
    std::map<std::string, std::size_t> index;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string ctx = std::string(source_name) + ":" + std::to_string(table.line_numbers[r]);
        auto [it, inserted] = index.try_emplace(row[c_id], rounds.size());
        if (inserted) {
            rounds.emplace_back();
            rounds.back().round_id = row[c_id];
            rounds.back().year = io::parse_number(row[c_year], ctx + " year");
            if (std::isnan(rounds.back().year)) throw ValidationError(ctx + ": missing year");
        }
        BandedDistribution& round = rounds[it->second];
        const double year = io::parse_number(row[c_year], ctx + " year");
        if (year != round.year) throw ValidationError(ctx + ": year differs within round '" + round.round_id + "'");

        Band band;
        band.lower = io::parse_number(row[c_lower], ctx + " band_lower");
        band.upper = io::parse_number(row[c_upper], ctx + " band_upper");
        band.population_share = io::parse_number(row[c_share], ctx + " population_share");
        if (std::isnan(band.lower) || std::isnan(band.upper) || std::isnan(band.population_share))
            throw ValidationError(ctx + ": band_lower, band_upper and population_share are required");
        band.mean_total_expenditure = optional_number(row[c_total], ctx + " mean_total_expenditure");
        band.mean_cereal_expenditure = optional_number(row[c_cereal], ctx + " mean_cereal_expenditure");
        band.source_line = table.line_numbers[r];
        round.bands.push_back(band);
    }
    if (rounds.empty()) throw ValidationError(std::string(source_name) + ": no data rows");
    for (auto& round : rounds) {
        std::sort(round.bands.begin(), round.bands.end(),
                  [](const Band& a, const Band& b) { return a.lower < b.lower; });
        validate_round(round, diag);
    }
    return rounds;
}

std::vector<BandedDistribution> load_rounds(const std::filesystem::path& path, Diagnostics* diag)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_rounds(buf.str(), path.string(), diag);
}

BandedDistribution load_round(const std::filesystem::path& path, Diagnostics* diag)
{
    auto rounds = load_rounds(path, diag);
    if (rounds.size() != 1)
        throw ValidationError("'" + path.string() + "' holds " + std::to_string(rounds.size()) +
                              " rounds; expected exactly one");
    return std::move(rounds.front());
}

DeflatorTable parse_deflators(std::string_view csv_text, double reference_year, double reference_mean_income)
{
    const io::CsvTable table = io::parse_csv(csv_text, "deflators");
    const auto c_year = table.column("year");
    const auto c_cpi = table.column("cpi");
    DeflatorTable out;
    out.reference_year = reference_year;
    out.reference_mean_income = reference_mean_income;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const std::string ctx = "deflators:" + std::to_string(table.line_numbers[r]);
        const double year = io::parse_number(table.rows[r][c_year], ctx);
        const double cpi = io::parse_number(table.rows[r][c_cpi], ctx);
        if (!out.cpi.emplace(year, cpi).second) throw ValidationError(ctx + ": duplicate year");
    }
    out.validate();
    return out;
}

DeflatorTable load_deflators(const std::filesystem::path& path, double reference_year, double reference_mean_income)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_deflators(buf.str(), reference_year, reference_mean_income);
}

void DeflatorTable::validate() const
{
    if (cpi.empty()) throw ValidationError("deflator table is empty");
    for (const auto& [year, value] : cpi)
        if (!(value > 0.0) || !std::isfinite(value) || !std::isfinite(year))
            throw ValidationError("deflator for year " + io::format_number(year) + " must be positive");
    if (!cpi.contains(reference_year))
        throw ValidationError("reference year " + io::format_number(reference_year) + " missing from deflator table");
    if (reference_mean_income < 0.0) throw ValidationError("reference mean income must be >= 0");
}

double DeflatorTable::cpi_at(double year) const
{
    if (cpi.empty()) throw ValidationError("deflator table is empty");
    const auto exact = cpi.find(year);
    if (exact != cpi.end()) return exact->second;
    const auto hi = cpi.upper_bound(year);
    if (hi == cpi.begin() || hi == cpi.end())
        throw ValidationError("year " + io::format_number(year) + " outside deflator table [" +
                              io::format_number(cpi.begin()->first) + ", " + io::format_number(cpi.rbegin()->first) + "]");
    const auto lo = std::prev(hi);
    const double w = (year - lo->first) / (hi->first - lo->first);
    return lo->second + w * (hi->second - lo->second);
}

double DeflatorTable::ratio(double year) const { return cpi_at(reference_year) / cpi_at(year); }

std::string format_rounds(std::span<const BandedDistribution> rounds)
{
    io::CsvWriter csv({"round_id", "year", "band_lower", "band_upper", "population_share", "mean_total_expenditure",
                       "mean_cereal_expenditure"});
    auto opt = [](const std::optional<double>& v) { return v ? io::format_number(*v) : std::string(); };
    for (const auto& round : rounds)
        for (const auto& b : round.bands)
            csv.row({round.round_id, io::format_number(round.year), io::format_number(b.lower), io::format_number(b.upper),
                     io::format_number(b.population_share), opt(b.mean_total_expenditure),
                     opt(b.mean_cereal_expenditure)});
    return csv.str();
}

// ---------------------------------------------------------------------------
// Linear maps

BandedDistribution scale_monetary(const BandedDistribution& round, double factor)
{
    if (!(factor > 0.0) || !std::isfinite(factor)) throw ValidationError("scale factor must be positive and finite");
    BandedDistribution out = round;
    for (Band& b : out.bands) {
        b.lower *= factor;
        b.upper *= factor;
        if (b.mean_total_expenditure) *b.mean_total_expenditure *= factor;
        if (b.mean_cereal_expenditure) *b.mean_cereal_expenditure *= factor;
    }
    return out;
}

BandedDistribution deflate(const BandedDistribution& round, const DeflatorTable& table)
{
    return scale_monetary(round, table.ratio(round.year));
}

BandedDistribution inflate(const BandedDistribution& round, const DeflatorTable& table)
{
    return scale_monetary(round, 1.0 / table.ratio(round.year));
}

double open_band_exponent(const BandedDistribution& round)
{
    constexpr double fallback = 3.0;
    const auto& bands = round.bands;
    if (bands.size() < 3 || !bands.back().open()) return fallback;
    const Band& b1 = bands[bands.size() - 3];
    const Band& b2 = bands[bands.size() - 2];
    if (!(b1.population_share > 0.0) || !(b2.population_share > 0.0) || !(b1.lower > 0.0)) return fallback;
    const double d1 = b1.population_share / b1.width();
    const double d2 = b2.population_share / b2.width();
    const double c1 = std::sqrt(b1.lower * b1.upper);
    const double c2 = std::sqrt(b2.lower * b2.upper);
    const double a = -std::log(d2 / d1) / std::log(c2 / c1);
    if (!std::isfinite(a) || a <= 1.0) return fallback;
    return a;
}

double representative_income(const BandedDistribution& round, std::size_t b)
{
    const Band& band = round.bands.at(b);
    if (band.mean_total_expenditure) return *band.mean_total_expenditure;
    if (!band.open()) return 0.5 * (band.lower + band.upper);
    const double a = open_band_exponent(round);
    if (a <= 2.0) return 2.0 * band.lower;  // infinite Pareto mean; keep a finite stand-in
    return band.lower * (a - 1.0) / (a - 2.0);
}

double mean_income(const BandedDistribution& round)
{
    double m = 0.0;
    for (std::size_t b = 0; b < round.bands.size(); ++b)
        m += round.bands[b].population_share * representative_income(round, b);
    return m;
}

BandedDistribution collapse_rescale(const BandedDistribution& round, double target_mean)
{
    if (!(target_mean > 0.0)) throw ValidationError("collapse: target mean must be positive");
    const double m = mean_income(round);
    if (!(m > 0.0)) throw ValidationError("collapse: round '" + round.round_id + "' has zero mean income");
    return scale_monetary(round, target_mean / m);
}

// ---------------------------------------------------------------------------
// Empirical CDF / IPDF

EmpiricalCdf::EmpiricalCdf(const BandedDistribution& round)
{
    if (round.bands.size() < 2) throw ValidationError("empirical CDF needs at least two bands");
    double cum = 0.0;
    edges_.push_back(round.bands.front().lower);
    cumulative_.push_back(0.0);
    for (const Band& b : round.bands) {
        if (b.open()) {
            open_share_ = b.population_share;
            tail_exponent_ = open_band_exponent(round);
            break;
        }
        cum += b.population_share;
        edges_.push_back(b.upper);
        cumulative_.push_back(std::min(cum, 1.0));
    }
    if (open_share_ == 0.0) cumulative_.back() = 1.0;
}

double EmpiricalCdf::operator()(double y) const
{
    if (y <= edges_.front()) return 0.0;
    if (y >= edges_.back()) {
        if (open_share_ == 0.0) return 1.0;
        return 1.0 - open_share_ * std::pow(y / edges_.back(), 1.0 - tail_exponent_);
    }
    const auto it = std::upper_bound(edges_.begin(), edges_.end(), y);
    const auto i = static_cast<std::size_t>(it - edges_.begin());
    const double w = (y - edges_[i - 1]) / (edges_[i] - edges_[i - 1]);
    return cumulative_[i - 1] + w * (cumulative_[i] - cumulative_[i - 1]);
}

EmpiricalCdf empirical_cdf(const BandedDistribution& round) { return EmpiricalCdf(round); }

double PiecewiseDensity::operator()(double y) const
{
    for (const auto& s : segments)
        if (y >= s.lower && y < s.upper) return s.density;
    if (open_share > 0.0 && y >= open_lower)
        return open_share * (open_exponent - 1.0) / open_lower * std::pow(y / open_lower, -open_exponent);
    return 0.0;
}

double PiecewiseDensity::open_effective_width() const
{
    if (!(open_share > 0.0)) return 0.0;
    return open_lower / (open_exponent - 1.0);
}

PiecewiseDensity empirical_ipdf(const BandedDistribution& round)
{
    if (round.bands.size() < 2) throw ValidationError("empirical IPDF needs at least two bands");
    PiecewiseDensity pd;
    for (const Band& b : round.bands) {
        if (b.open()) {
            pd.open_lower = b.lower;
            pd.open_share = b.population_share;
            pd.open_exponent = open_band_exponent(round);
        } else {
            pd.segments.push_back({b.lower, b.upper, b.population_share / b.width()});
        }
    }
    return pd;
}

// ---------------------------------------------------------------------------
// Synthetic rounds

namespace {

// Mass of Gamma(shape) between u_lo = C0/upper and u_hi = C0/lower, taking
// differences on the side where they do not cancel.
double gamma_mass(double shape, double u_lo, double u_hi)
{
    if (u_hi <= u_lo) return 0.0;
    if (u_hi < shape)
        return reg_lower_incomplete_gamma(shape, u_hi) - reg_lower_incomplete_gamma(shape, u_lo);
    return reg_upper_incomplete_gamma(shape, u_lo) - reg_upper_incomplete_gamma(shape, u_hi);
}

double to_u(double scale, double y) { return y <= 0.0 ? kInf : (std::isinf(y) ? 0.0 : scale / y); }

void check_edges(std::span<const double> edges)
{
    if (edges.size() < 2) throw ValidationError("need at least two band edges");
    if (!(edges.front() >= 0.0)) throw ValidationError("band edges must be >= 0");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1])) throw ValidationError("band edges must be strictly increasing");
    for (std::size_t i = 0; i + 1 < edges.size(); ++i)
        if (std::isinf(edges[i])) throw ValidationError("only the last band edge may be infinite");
}

}  // namespace

std::vector<double> band_probabilities(const SteadyStateIPDF& dist, std::span<const double> band_edges)
{
    check_edges(band_edges);
    const double shape = dist.shape() + 1.0;
    std::vector<double> p(band_edges.size() - 1);
    for (std::size_t b = 0; b + 1 < band_edges.size(); ++b) {
        const double lo = band_edges[b] - dist.offset();
        const double hi = band_edges[b + 1] - dist.offset();
        p[b] = gamma_mass(shape, to_u(dist.scale(), hi), to_u(dist.scale(), lo));
    }
    return p;
}

std::vector<double> quantile_edges(const SteadyStateIPDF& dist, std::size_t n_bands)
{
    if (n_bands < 2) throw ValidationError("quantile_edges: need at least two bands");
    std::vector<double> edges{0.0};
    for (std::size_t k = 1; k < n_bands; ++k)
        edges.push_back(dist.offset() + ipdf_quantile(dist, static_cast<double>(k) / static_cast<double>(n_bands)));
    edges.push_back(kInf);
    return edges;
}

BandedDistribution synth_round(const SteadyStateIPDF& dist, std::span<const double> band_edges,
                               std::uint64_t n_population, std::uint64_t seed, const SynthOptions& options)
{
    if (n_population == 0) throw ValidationError("synth_round: population must be positive");
    const auto probs = band_probabilities(dist, band_edges);
    const std::size_t n_bands = probs.size();

    std::vector<double> cumulative(n_bands);
    std::partial_sum(probs.begin(), probs.end(), cumulative.begin());

    // Categorical draws in fixed-size chunks, one counter stream per chunk.
    constexpr std::uint64_t chunk = 1 << 16;
    const auto n_chunks = static_cast<std::int64_t>((n_population + chunk - 1) / chunk);
    std::vector<std::uint64_t> counts(n_bands, 0);
#pragma omp parallel
    {
        std::vector<std::uint64_t> local(n_bands, 0);
#pragma omp for schedule(static)
        for (std::int64_t c = 0; c < n_chunks; ++c) {
            CounterStream stream(seed, StreamDomain::survey, static_cast<std::uint32_t>(c));
            const std::uint64_t begin = static_cast<std::uint64_t>(c) * chunk;
            const std::uint64_t end = std::min(n_population, begin + chunk);
            for (std::uint64_t i = begin; i < end; ++i) {
                const double u = stream.uniform() * cumulative.back();
                auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
                if (it == cumulative.end()) --it;
                ++local[static_cast<std::size_t>(it - cumulative.begin())];
            }
        }
#pragma omp critical
        for (std::size_t b = 0; b < n_bands; ++b) counts[b] += local[b];
    }

    // E[y | band] from the shape-M law: y f_M(y) = (C0 / M) f_{M-1}(y).
    const double shape = dist.shape();
    BandedDistribution round;
    round.round_id = options.round_id;
    round.year = options.year;
    round.sample_size = n_population;
    round.currency_note = "synthetic";
    for (std::size_t b = 0; b < n_bands; ++b) {
        Band band;
        band.lower = band_edges[b];
        band.upper = band_edges[b + 1];
        band.population_share = static_cast<double>(counts[b]) / static_cast<double>(n_population);
        const double lo = band.lower - dist.offset();
        const double hi = band.upper - dist.offset();
        const double u_lo = to_u(dist.scale(), hi);
        const double u_hi = to_u(dist.scale(), lo);
        if (probs[b] > 0.0 && (!band.open() || shape > 1.0)) {
            const double first_moment = dist.scale() / shape * gamma_mass(shape, u_lo, u_hi);
            double mean = dist.offset() + first_moment / probs[b];
            mean = std::clamp(mean, band.lower, band.upper);
            if (mean > 0.0) band.mean_total_expenditure = mean;
        }
        if (options.monod) {
            const double y = band.mean_total_expenditure ? *band.mean_total_expenditure
                                                         : (band.open() ? band.lower : 0.5 * (band.lower + band.upper));
            band.mean_cereal_expenditure = options.monod->V * y / (options.monod->K + y);
            // V y / (K + y) <= y needs y >= V - K; clamping would break the exact curve.
            if (band.mean_total_expenditure && *band.mean_cereal_expenditure > *band.mean_total_expenditure)
                throw ValidationError("synth_round: Monod cereal expenditure exceeds total expenditure in band " +
                                      std::to_string(b) + " (mean " + io::format_number(y) +
                                      "); need V <= K + band mean");
        }
        round.bands.push_back(band);
    }
    validate_round(round);
    return round;
}

ModelIncomes to_model_incomes(std::span<const double> observed, double offset)
{
    constexpr double epsilon = 1e-6;
    ModelIncomes out;
    out.values.reserve(observed.size());
    for (double x : observed) {
        double y = x - offset;
        if (y <= 0.0) {
            y = epsilon;
            ++out.clamped;
        }
        out.values.push_back(y);
    }
    return out;
}

}  // namespace income
