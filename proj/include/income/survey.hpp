#pragma once

// Banded household-survey rounds ("expenditure classes"): loading and
// validation, CPI deflation, mean rescaling for data collapse, empirical
// CDF/IPDF, and a synthetic round generator driven by the steady-state law.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "income/distlib.hpp"

namespace income {

/// Collects non-fatal warnings from loaders and estimators.
struct Diagnostics {
    std::vector<std::string> warnings;
    void warn(std::string message) { warnings.push_back(std::move(message)); }
};

struct Band {
    double lower = 0.0;
    double upper = 0.0;  ///< +inf for the open top band
    double population_share = 0.0;
    std::optional<double> mean_total_expenditure;
    std::optional<double> mean_cereal_expenditure;
    std::size_t source_line = 0;  ///< CSV line, 0 when not loaded from a file

    bool open() const noexcept;
    double width() const noexcept { return upper - lower; }
};

struct BandedDistribution {
    std::string round_id;
    double year = 0.0;
    std::vector<Band> bands;
    std::string currency_note;
    std::uint64_t sample_size = 0;  ///< households behind the shares; 0 if unknown
};

struct DeflatorTable {
    std::map<double, double> cpi;  ///< year -> CPI
    double reference_year = 0.0;
    double reference_mean_income = 0.0;

    /// CPI at `year`, linearly interpolated between table years.
    double cpi_at(double year) const;
    /// cpi(reference_year) / cpi(year).
    double ratio(double year) const;
    void validate() const;
};

/// Enforce every BandedDistribution invariant.  Shares off by more than 1e-6
/// are renormalized with a warning; off by more than 1e-3 they are rejected.
void validate_round(BandedDistribution& round, Diagnostics* diag = nullptr);

/// Load a file holding exactly one round.
BandedDistribution load_round(const std::filesystem::path& path, Diagnostics* diag = nullptr);
/// Load every round of a file, in order of first appearance.
std::vector<BandedDistribution> load_rounds(const std::filesystem::path& path, Diagnostics* diag = nullptr);
std::vector<BandedDistribution> parse_rounds(std::string_view csv_text, std::string_view source_name,
                                             Diagnostics* diag = nullptr);

DeflatorTable load_deflators(const std::filesystem::path& path, double reference_year,
                             double reference_mean_income = 0.0);
DeflatorTable parse_deflators(std::string_view csv_text, double reference_year, double reference_mean_income = 0.0);

/// Rounds CSV text with the canonical header.
std::string format_rounds(std::span<const BandedDistribution> rounds);

/// Multiply every monetary field by `factor`; shares untouched.
BandedDistribution scale_monetary(const BandedDistribution& round, double factor);

/// Express the round in reference-year prices.  Throws ValidationError when
/// the round's year lies outside the table (no extrapolation).
BandedDistribution deflate(const BandedDistribution& round, const DeflatorTable& table);
/// Inverse of deflate.
BandedDistribution inflate(const BandedDistribution& round, const DeflatorTable& table);

/// Pareto density exponent of the open band, fitted through the densities of
/// the last two closed bands.  Falls back to 3 when the fit is degenerate.
double open_band_exponent(const BandedDistribution& round);

/// Representative income of band b: its mean when given, else the midpoint
/// (closed) or the Pareto conditional mean (open).
double representative_income(const BandedDistribution& round, std::size_t b);

/// sum_b share_b * representative_income_b.
double mean_income(const BandedDistribution& round);

/// Rescale all monetary quantities so the round's mean equals target_mean.
BandedDistribution collapse_rescale(const BandedDistribution& round, double target_mean);

/// Interpolated CDF: linear inside closed bands, Pareto inside the open band.
class EmpiricalCdf {
public:
    explicit EmpiricalCdf(const BandedDistribution& round);
    double operator()(double y) const;
    /// Band edges and cumulative shares at them (last closed edge included).
    const std::vector<double>& edges() const noexcept { return edges_; }
    const std::vector<double>& cumulative() const noexcept { return cumulative_; }

private:
    std::vector<double> edges_;
    std::vector<double> cumulative_;
    double open_share_ = 0.0;
    double tail_exponent_ = 0.0;
};

EmpiricalCdf empirical_cdf(const BandedDistribution& round);

/// Piecewise density: share / width per closed band, Pareto in the open band.
struct PiecewiseDensity {
    struct Segment {
        double lower, upper, density;
    };
    std::vector<Segment> segments;
    double open_lower = 0.0;
    double open_share = 0.0;
    double open_exponent = 0.0;

    double operator()(double y) const;
    /// Width the open band would need at its edge density: L / (a - 1).
    double open_effective_width() const;
};

PiecewiseDensity empirical_ipdf(const BandedDistribution& round);

struct MonodParams {
    double V = 1.0;
    double K = 0.5;
};

struct SynthOptions {
    std::string round_id = "synthetic";
    double year = 0.0;
    std::optional<MonodParams> monod;  ///< adds cereal expenditure V y / (K + y)
};

/// Draw a banded round of n_population households from `dist`.  Band edges
/// are in observed income (model income + dist.offset()); the last edge may
/// be +inf.  Shares are multinomial frequencies of the exact band
/// probabilities; band means are exact conditional expectations.
BandedDistribution synth_round(const SteadyStateIPDF& dist, std::span<const double> band_edges,
                               std::uint64_t n_population, std::uint64_t seed, const SynthOptions& options = {});

/// Exact probability of each band under dist (edges in observed income).
std::vector<double> band_probabilities(const SteadyStateIPDF& dist, std::span<const double> band_edges);

/// Edges at equally spaced quantiles of dist plus 0 and +inf, in observed income.
std::vector<double> quantile_edges(const SteadyStateIPDF& dist, std::size_t n_bands);

struct ModelIncomes {
    std::vector<double> values;
    std::size_t clamped = 0;  ///< incomes at or below the offset, set to 1e-6
};

/// y = x - offset, clamping non-positive results to 1e-6.
ModelIncomes to_model_incomes(std::span<const double> observed, double offset);

}  // namespace income
