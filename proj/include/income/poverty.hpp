#pragma once

// Poverty indices: the Foster–Greer–Thorbecke family (headcount, gap, squared
// gap) at a fixed line, and the consumption-deprivation index
//
//     P_CD = ∫ V K / (K + y) f(y) dy
//
// computed from banded survey data and from the model density, plus a
// property checker for Sen's monotonicity and transfer axioms.

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "income/distlib.hpp"
#include "income/estimate.hpp"
#include "income/fpsolve.hpp"
#include "income/survey.hpp"

namespace income {

struct PovertyLine {
    double z;

    /// Throws ValidationError unless z > 0.
    explicit PovertyLine(double z);
};

struct FgtIndices {
    double hci = 0.0;  ///< P(y < z)
    double pg = 0.0;   ///< E[max(0, (z - y) / z)]
    double spg = 0.0;  ///< E[max(0, (z - y) / z)^2]
};

FgtIndices fgt_indices(std::span<const double> incomes, PovertyLine line);

/// Banded version: uniform density inside closed bands, the Pareto tail of
/// empirical_cdf inside the open band.
FgtIndices fgt_indices(const BandedDistribution& round, PovertyLine line);

/// CD(y) = V K / (K + y).
double consumption_deprivation(double y, const MonodFit& monod);

/// sum_b share_b max(0, V - s_b) with s_b the observed cereal expenditure.
double cd_index_direct(const BandedDistribution& round, const MonodFit& monod);

/// sum_b share_b CD(ybar_b): the model index on the banded measure.
double cd_index_banded(const BandedDistribution& round, const MonodFit& monod);

/// Sample average of CD(y).
double cd_index_sample(std::span<const double> incomes, const MonodFit& monod);

/// Quadrature of CD(y + offset) f(y) over model income y, substituting
/// u = C0 / y.  K stays in observed-income units.
double cd_index_model(const SteadyStateIPDF& dist, const MonodFit& monod);

/// Trapezoid rule on the density's grid.  Throws ValidationError when the
/// mass differs from 1 by more than 1e-6.
double cd_index_model(const GridDensity& density, const MonodFit& monod, double offset = 0.0);

struct IndexRow {
    std::string round_id;
    double year = 0.0;
    double hci = 0.0, pg = 0.0, spg = 0.0;
    double pcd_direct = 0.0;
    double pcd_model = 0.0;
    double pcd_banded = 0.0;  ///< model index on the banded measure
    // Parameters used for this round.
    double M = 0.0, C = 0.0, offset = 0.0;
    MonodFit monod;
};

struct IndexSeries {
    double poverty_line = 0.0;
    std::vector<IndexRow> rows;
};

/// All indices per round.  The model index uses the common M (mean of the
/// fits) and C(t) from labour_rate_series, i.e. the quasi-static steady state
/// at each round's labour rate.  Throws ValidationError on misaligned input.
IndexSeries index_series(std::span<const BandedDistribution> rounds, std::span<const FitResult> fits,
                         std::span<const MonodFit> monods, PovertyLine line, Diagnostics* diag = nullptr);

/// CSV with header round_id,year,hci,pg,spg,pcd_direct,pcd_model.
std::string format_index_series(const IndexSeries& series);

// ---------------------------------------------------------------------------
// Sen's axioms

enum class IndexKind { hci, pg, spg, pcd };

struct IndexChoice {
    IndexKind kind = IndexKind::pg;
    double z = 1.0;      ///< poverty line for hci/pg/spg
    MonodFit monod{};    ///< V, K for pcd
};

struct Reduce {
    std::size_t person;
    double delta;
};

struct Transfer {
    std::size_t from;
    std::size_t to;
    double delta;
};

using Perturbation = std::variant<Reduce, Transfer>;

struct AxiomCheck {
    bool pass = false;
    double before = 0.0;
    double after = 0.0;
    std::string witness;
};

double index_value(std::span<const double> incomes, const IndexChoice& index);

/// Apply the perturbation and require the index to increase by more than
/// 1e-12.  Throws ValidationError when the perturbation is ineligible: the
/// affected (donor) income must lie below z for hci/pg/spg, the recipient
/// must be strictly richer, and 0 < delta <= income.
AxiomCheck sen_axiom_check(std::span<const double> incomes, const IndexChoice& index, const Perturbation& perturbation);

std::string to_string(IndexKind kind);

}  // namespace income
