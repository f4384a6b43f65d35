#pragma once

// Parameter estimation from banded survey rounds: binned maximum likelihood
// for the steady-state law, least squares for the Monod cereal curve, and the
// labour-rate series C(t) implied by the fitted rounds.

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "income/piecewise.hpp"
#include "income/survey.hpp"

namespace income {

// ---------------------------------------------------------------------------
// Derivative-free minimization

struct SimplexOptions {
    int max_evaluations = 2000;
    double tolerance = 1e-9;  ///< simplex diameter (max-norm) at convergence
    int max_restarts = 2;     ///< fresh simplex around the optimum after convergence
};

struct SimplexResult {
    std::vector<double> x;
    double value = 0.0;
    int evaluations = 0;
    double diameter = 0.0;
    bool converged = false;
};

/// Nelder–Mead with the standard coefficients (1, 2, 1/2, 1/2).  The
/// objective may return +inf to reject a point.
SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& objective, std::vector<double> x0,
                          std::vector<double> step, const SimplexOptions& options = {});

// ---------------------------------------------------------------------------
// Steady-state fit

enum class C0Mode {
    fit,   ///< C0 is a free parameter
    mean,  ///< C0 = M (mean income - offset); only M (and offset) are fitted
};

struct FitOptions {
    /// Offset in the round's units; nullopt fits it jointly.
    std::optional<double> fix_offset = 0.15;
    C0Mode c0_mode = C0Mode::fit;
    int max_evaluations = 10000;  ///< shared across all starts
    double tolerance = 1e-9;      ///< simplex diameter in log-parameter space
};

struct FitResult {
    double M = 0.0;
    double C0 = 0.0;
    double offset = 0.0;
    double log_likelihood = 0.0;  ///< sum_b share_b log p_b, i.e. per household
    bool converged = false;
    int n_evaluations = 0;
    double simplex_diameter = 0.0;
    std::vector<double> per_band_expected_shares;
};

/// sum_b share_b log p_b(M, C0, offset); -inf when an occupied band has zero
/// probability.
double band_log_likelihood(const BandedDistribution& round, double M, double C0, double offset);

/// Band edges of a round: every lower edge followed by the last upper edge.
std::vector<double> band_edges(const BandedDistribution& round);

/// Binned multinomial maximum likelihood with five simplex starts
/// (M in {0.8, 1.6, 3.0} with C0 = M * mean, plus C0 halved and doubled at
/// M = 1.6).  Throws ValidationError for fewer than four bands or fewer than
/// two occupied bands.
FitResult fit_ipdf(const BandedDistribution& round, const FitOptions& options = {});

/// Fit on the round rescaled to mean 1, then map C0 and offset back.  The
/// offset in `options` is then in collapsed units.
FitResult fit_ipdf_collapsed(const BandedDistribution& round, const FitOptions& options = {});

// ---------------------------------------------------------------------------
// Monod curve

struct MonodFit {
    double V = 0.0;
    double K = 0.0;
    double rss = 0.0;
    bool at_boundary = false;  ///< K ended on the edge of its search interval
};

/// Residual sum of squares of s_b = V y_b / (K + y_b).
double monod_rss(std::span<const double> incomes, std::span<const double> cereal, double V, double K);

/// Least-squares fit of cereal = V y / (K + y): golden-section search over
/// log K in [min y / 10, max y * 10] with V in closed form.
MonodFit fit_monod(std::span<const double> incomes, std::span<const double> cereal);

/// Same, using each band's representative income and cereal expenditure.
/// Throws ValidationError when cereal data is missing or there are < 3 bands.
MonodFit fit_monod(const BandedDistribution& round);

// ---------------------------------------------------------------------------
// Labour rate

struct RoundMean {
    double year = 0.0;
    double mean = 0.0;  ///< mean model income (offset removed)
};

/// C(t_k) = M * mean_k, linear between rounds.  A single round yields a
/// constant function and a warning.
PiecewiseLinear labour_rate_series(std::span<const RoundMean> means, double M, Diagnostics* diag = nullptr);

/// From fitted rounds: M is the average fitted M, means are mean income minus
/// the fitted offset.
PiecewiseLinear labour_rate_series(std::span<const BandedDistribution> rounds, std::span<const FitResult> fits,
                                   Diagnostics* diag = nullptr);

}  // namespace income
