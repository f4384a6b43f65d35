#pragma once

// Fokker–Planck evolution of the income density
//
//     df/dt = d/dy { [(M+2) y - C(t)] f + y^2 df/dy }
//
// on a logarithmic grid, plus the confluent-hypergeometric eigenmode
// evaluator for the transient expansion.

#include <cstdint>
#include <span>
#include <vector>

#include "income/distlib.hpp"
#include "income/piecewise.hpp"

namespace income {

/// Nodal density on a strictly increasing positive grid.  Mass is the
/// trapezoidal integral, which equals the finite-volume sum sum_j w_j f_j.
struct GridDensity {
    std::vector<double> grid;
    std::vector<double> values;
    double time = 0.0;

    double mass() const;
};

/// n log-spaced points on [lo, hi].
std::vector<double> make_log_grid(double lo, double hi, std::size_t n);

/// Default solver grid for a given steady state: 2000 points on
/// [1e-3, 1e3] * C0 / M.
std::vector<double> default_grid(double M, double C0, std::size_t n = 2000);

/// Control-volume widths (trapezoid weights) of a grid.
std::vector<double> cell_widths(std::span<const double> grid);

/// Closed-form density sampled on the grid.
GridDensity sample_density(const SteadyStateIPDF& dist, std::vector<double> grid);

/// Gaussian bump in log y centred at `center`, normalized on the grid.
GridDensity bump_density(std::vector<double> grid, double center, double log_width = 0.05);

/// Trapezoidal L1 distance between a grid density and the closed form.
double l1_distance(const GridDensity& f, const SteadyStateIPDF& dist);

struct EvolveOptions {
    std::vector<double> snapshot_times; ///< sorted; rounded to the step grid
    /// Largest accepted dt * (max diagonal rate).  The scheme is implicit, so
    /// this bounds time-discretization error rather than stability.
    double max_rate_dt = 1e4;
};

struct EvolveResult {
    GridDensity final;
    std::vector<GridDensity> snapshots;
    double max_mass_drift = 0.0; ///< max |mass(t) - mass(0)| over all steps
};

/// Backward-Euler finite-volume evolution with zero-flux boundaries.  Interface
/// fluxes use Chang–Cooper/Scharfetter–Gummel exponential weighting with the
/// exact potential difference, so the discrete steady state coincides with
/// the closed form at the nodes.
///
/// Throws ValidationError (with a suggested dt) when the rate limit is
/// exceeded and NumericalError when a value drops below -1e-12.
EvolveResult evolve(const GridDensity& f0, double M, const PiecewiseLinear& labour_rate, double t_end, double dt,
                    const EvolveOptions& options = {});

/// Largest dt accepted by `evolve` for this grid and C range.
double max_stable_dt(std::span<const double> grid, double M, double C, double max_rate_dt = 1e4);

/// Relative sup-norm of the discrete flux [(M+2)y - C0] f + y^2 f' of the
/// closed-form density at the grid's interfaces.  The flux is formed from
/// log-space differences at geometric midpoints (second order in the log
/// spacing) and scaled by the largest sum of its three term magnitudes.
double steady_state_residual(double M, double C0, std::span<const double> grid);

/// Same residual for an arbitrary positive nodal density.
double flux_residual(double M, double C0, std::span<const double> grid, std::span<const double> density);

// ---------------------------------------------------------------------------
// Kummer function and eigenmodes

struct KummerSeries {
    double value = 0.0;
    int terms = 0;
    double remainder_bound = 0.0;  ///< bound on the neglected tail at exit
    bool transformed = false;      ///< Kummer transformation applied (z < 0)
};

/// Kummer's confluent hypergeometric M(a, b, z).  For z < 0 the series is
/// summed for M(b - a, b, -z) and multiplied by e^z.  Throws DomainError when
/// b is a nonpositive integer and NumericalError on overflow or |z| > 700.
double kummer_m(double a, double b, double z);
KummerSeries kummer_m_series(double a, double b, double z);

struct EigenMode {
    int n = 0;
    double omega = 0.0;
    double alpha_plus = 0.0;
    double alpha_minus = 0.0;
    double beta_plus = 0.0;
    double beta_minus = 0.0;
    double A1 = 0.0;
    double A2 = 0.0;
    double c = 1.0;
    bool minus_branch_pole = false;  ///< beta_minus is a nonpositive integer
};

/// omega_n = 2 pi n, alpha± = (3 + M ± sqrt((1+M)^2 + 4 omega)) / 2,
/// beta± = 1 ± sqrt((1+M)^2 + 4 omega).  Coefficients default to zero, c to 1.
EigenMode eigenmode_params(int n, double M);

/// g_n(y) = A1 (c/y)^a- M(a-, b-, -c/y) + A2 (c/y)^a+ M(a+, b+, -c/y).
/// A branch with zero coefficient is skipped.
double eigenmode_eval(const EigenMode& mode, double y);

struct OperatorResidual {
    double growth = 0.0; ///< max |L g - omega g| / scale
    double decay = 0.0;  ///< max |L g + omega g| / scale
};

/// Apply the second-order finite-difference Fokker–Planck operator
/// L g = y^2 g'' + ((M+4) y - C) g' + (M+2) g to the mode on the interior of a
/// log grid and compare with ±omega g.  Scale is max |L g| + max |omega g|.
OperatorResidual eigenmode_operator_residual(const EigenMode& mode, double M, double C,
                                             std::span<const double> grid);

}  // namespace income
