#include "income/fpsolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "income/error.hpp"

namespace income {

namespace {

void check_grid(std::span<const double> grid)
{
    if (grid.size() < 3) throw ValidationError("grid needs at least 3 points");
    if (!(grid.front() > 0.0)) throw ValidationError("grid must be positive");
    for (std::size_t j = 1; j < grid.size(); ++j)
        if (!(grid[j] > grid[j - 1]) || !std::isfinite(grid[j]))
            throw ValidationError("grid must be strictly increasing and finite");
}

// x / (e^x - 1), the Bernoulli weight of exponential fitting.
double bernoulli(double x)
{
    if (std::fabs(x) < 1e-10) return 1.0 - 0.5 * x;
    if (x > 700.0) return 0.0;
    return x / std::expm1(x);
}

}  // namespace

double GridDensity::mass() const
{
    const auto w = cell_widths(grid);
    double m = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) m += w[j] * values[j];
    return m;
}

std::vector<double> make_log_grid(double lo, double hi, std::size_t n)
{
    if (!(lo > 0.0) || !(hi > lo) || n < 3) throw ValidationError("make_log_grid: need 0 < lo < hi and n >= 3");
    std::vector<double> grid(n);
    const double llo = std::log(lo);
    const double step = (std::log(hi) - llo) / static_cast<double>(n - 1);
    for (std::size_t j = 0; j < n; ++j) grid[j] = std::exp(llo + step * static_cast<double>(j));
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

std::vector<double> default_grid(double M, double C0, std::size_t n)
{
    const double mean = C0 / M;
    return make_log_grid(1e-3 * mean, 1e3 * mean, n);
}

std::vector<double> cell_widths(std::span<const double> grid)
{
    check_grid(grid);
    const std::size_t n = grid.size();
    std::vector<double> w(n);
    w[0] = 0.5 * (grid[1] - grid[0]);
    w[n - 1] = 0.5 * (grid[n - 1] - grid[n - 2]);
    for (std::size_t j = 1; j + 1 < n; ++j) w[j] = 0.5 * (grid[j + 1] - grid[j - 1]);
    return w;
}

GridDensity sample_density(const SteadyStateIPDF& dist, std::vector<double> grid)
{
    check_grid(grid);
    GridDensity f;
    f.values.resize(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) f.values[j] = ipdf_density(dist, grid[j]);
    f.grid = std::move(grid);
    return f;
}

GridDensity bump_density(std::vector<double> grid, double center, double log_width)
{
    check_grid(grid);
    if (!(center > 0.0) || !(log_width > 0.0)) throw ValidationError("bump: center and width must be positive");
    GridDensity f;
    f.values.resize(grid.size());
    const double lc = std::log(center);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double d = (std::log(grid[j]) - lc) / log_width;
        f.values[j] = std::exp(-0.5 * d * d);
    }
    f.grid = std::move(grid);
    const double m = f.mass();
    if (!(m > 0.0)) throw ValidationError("bump: centre lies outside the grid");
    for (double& v : f.values) v /= m;
    return f;
}

double l1_distance(const GridDensity& f, const SteadyStateIPDF& dist)
{
    const auto w = cell_widths(f.grid);
    double d = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) d += w[j] * std::fabs(f.values[j] - ipdf_density(dist, f.grid[j]));
    return d;
}

// ---------------------------------------------------------------------------

namespace {

struct Tridiagonal {
    std::vector<double> lower, diag, upper;
};

// Interface coefficients: J_{j+1/2} = a_j f_{j+1} - b_j f_j.
struct Fluxes {
    std::vector<double> a, b;
};

Fluxes interface_fluxes(std::span<const double> y, double M, double C)
{
    const std::size_t n = y.size();
    Fluxes fx;
    fx.a.resize(n - 1);
    fx.b.resize(n - 1);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double h = y[j + 1] - y[j];
        const double d_over_h = y[j] * y[j + 1] / h;  // harmonic mean of y^2 over the interval
        const double dphi = (M + 2.0) * std::log(y[j + 1] / y[j]) + C * (1.0 / y[j + 1] - 1.0 / y[j]);
        fx.a[j] = d_over_h * bernoulli(-dphi);
        fx.b[j] = d_over_h * bernoulli(dphi);
    }
    return fx;
}

double max_rate(const Fluxes& fx, std::span<const double> widths)
{
    const std::size_t n = widths.size();
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double out = 0.0;
        if (j + 1 < n) out += fx.b[j];
        if (j > 0) out += fx.a[j - 1];
        r = std::max(r, out / widths[j]);
    }
    return r;
}

Tridiagonal implicit_matrix(const Fluxes& fx, std::span<const double> widths, double dt)
{
    const std::size_t n = widths.size();
    Tridiagonal m;
    m.lower.assign(n, 0.0);
    m.diag.assign(n, 0.0);
    m.upper.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        m.diag[j] = widths[j] / dt;
        if (j + 1 < n) {
            m.diag[j] += fx.b[j];
            m.upper[j] = -fx.a[j];
        }
        if (j > 0) {
            m.diag[j] += fx.a[j - 1];
            m.lower[j] = -fx.b[j - 1];
        }
    }
    return m;
}

void thomas_solve(const Tridiagonal& m, std::vector<double>& rhs, std::vector<double>& scratch)
{
    const std::size_t n = rhs.size();
    scratch.resize(n);
    double denom = m.diag[0];
    scratch[0] = m.upper[0] / denom;
    rhs[0] /= denom;
    for (std::size_t j = 1; j < n; ++j) {
        denom = m.diag[j] - m.lower[j] * scratch[j - 1];
        scratch[j] = m.upper[j] / denom;
        rhs[j] = (rhs[j] - m.lower[j] * rhs[j - 1]) / denom;
    }
    for (std::size_t j = n - 1; j-- > 0;) rhs[j] -= scratch[j] * rhs[j + 1];
}

}  // namespace

double max_stable_dt(std::span<const double> grid, double M, double C, double max_rate_dt)
{
    check_grid(grid);
    const auto w = cell_widths(grid);
    return max_rate_dt / max_rate(interface_fluxes(grid, M, C), w);
}

EvolveResult evolve(const GridDensity& f0, double M, const PiecewiseLinear& labour_rate, double t_end, double dt,
                    const EvolveOptions& options)
{
    check_grid(f0.grid);
    if (f0.values.size() != f0.grid.size()) throw ValidationError("evolve: grid/value size mismatch");
    if (!(M > 0.0)) throw ValidationError("evolve: M must be positive");
    if (!(dt > 0.0) || !(t_end >= 0.0)) throw ValidationError("evolve: need dt > 0 and t_end >= 0");
    if (!(labour_rate.min_value() > 0.0)) throw ValidationError("evolve: C(t) must stay positive");
    for (double v : f0.values)
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("evolve: initial density must be finite and >= 0");
    const double mass0 = f0.mass();
    if (std::fabs(mass0 - 1.0) > 1e-6)
        throw ValidationError("evolve: initial density not normalized (mass " + std::to_string(mass0) + ")");
    if (!std::is_sorted(options.snapshot_times.begin(), options.snapshot_times.end()))
        throw ValidationError("evolve: snapshot times must be sorted");

    const auto widths = cell_widths(f0.grid);
    const auto total = static_cast<std::uint64_t>(std::llround(t_end / dt));

    // Rate check across every distinct C the run will see at its knots and ends.
    {
        double worst = 0.0;
        std::vector<double> cs = labour_rate.values();
        cs.push_back(labour_rate(f0.time));
        cs.push_back(labour_rate(f0.time + t_end));
        for (double c : cs) worst = std::max(worst, max_rate(interface_fluxes(f0.grid, M, c), widths));
        if (dt * worst > options.max_rate_dt) {
            throw ValidationError("evolve: dt=" + std::to_string(dt) + " exceeds the rate limit; use dt <= " +
                                  std::to_string(options.max_rate_dt / worst));
        }
    }

    std::vector<std::uint64_t> snap_steps;
    for (double t : options.snapshot_times) {
        if (t < 0.0 || t > t_end * (1.0 + 1e-12)) throw ValidationError("evolve: snapshot time outside [0, t_end]");
        snap_steps.push_back(std::min(total, static_cast<std::uint64_t>(std::llround(t / dt))));
    }

    EvolveResult result;
    GridDensity f = f0;
    std::vector<double> scratch;
    std::size_t next_snap = 0;
    auto take_snapshots = [&](std::uint64_t k) {
        while (next_snap < snap_steps.size() && snap_steps[next_snap] == k) {
            result.snapshots.push_back(f);
            ++next_snap;
        }
    };
    take_snapshots(0);

    double cached_c = std::numeric_limits<double>::quiet_NaN();
    Tridiagonal matrix;
    for (std::uint64_t k = 1; k <= total; ++k) {
        const double t_next = f0.time + static_cast<double>(k) * dt;
        const double c = labour_rate(t_next);
        if (!(c == cached_c)) {
            matrix = implicit_matrix(interface_fluxes(f.grid, M, c), widths, dt);
            cached_c = c;
        }
        for (std::size_t j = 0; j < widths.size(); ++j) f.values[j] *= widths[j] / dt;
        thomas_solve(matrix, f.values, scratch);
        f.time = t_next;

        double mass = 0.0;
        for (std::size_t j = 0; j < widths.size(); ++j) {
            if (f.values[j] < -1e-12)
                throw NumericalError("evolve: negative density " + std::to_string(f.values[j]) + " at y=" +
                                     std::to_string(f.grid[j]) + ", t=" + std::to_string(t_next));
            mass += widths[j] * f.values[j];
        }
        result.max_mass_drift = std::max(result.max_mass_drift, std::fabs(mass - mass0));
        take_snapshots(k);
    }
    result.final = std::move(f);
    return result;
}

// ---------------------------------------------------------------------------

namespace {

// Shared by steady_state_residual and flux_residual; `log_f` holds log f at
// the nodes (-inf where f = 0).
double log_flux_residual(double M, double C0, std::span<const double> y, std::span<const double> log_f)
{
    double worst = 0.0;
    double scale = 0.0;
    for (std::size_t j = 0; j + 1 < y.size(); ++j) {
        if (!std::isfinite(log_f[j]) || !std::isfinite(log_f[j + 1])) continue;
        const double hx = std::log(y[j + 1] / y[j]);
        const double ym = std::sqrt(y[j] * y[j + 1]);
        const double fm = std::exp(0.5 * (log_f[j] + log_f[j + 1]));
        const double slope = (log_f[j + 1] - log_f[j]) / hx;  // d log f / d log y
        const double drift = (M + 2.0) * ym - C0;
        const double flux = fm * (drift + ym * slope);
        worst = std::max(worst, std::fabs(flux));
        scale = std::max(scale, fm * ((M + 2.0) * ym + C0 + ym * std::fabs(slope)));
    }
    if (!(scale > 0.0)) throw ValidationError("flux residual: density vanishes on the grid");
    return worst / scale;
}

}  // namespace

double steady_state_residual(double M, double C0, std::span<const double> grid)
{
    check_grid(grid);
    const SteadyStateIPDF dist(M, C0);
    std::vector<double> log_f(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) log_f[j] = ipdf_log_density(dist, grid[j]);
    return log_flux_residual(M, C0, grid, log_f);
}

double flux_residual(double M, double C0, std::span<const double> grid, std::span<const double> density)
{
    check_grid(grid);
    if (density.size() != grid.size()) throw ValidationError("flux_residual: size mismatch");
    std::vector<double> log_f(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (!(density[j] >= 0.0)) throw ValidationError("flux_residual: density must be >= 0");
        log_f[j] = density[j] > 0.0 ? std::log(density[j]) : -std::numeric_limits<double>::infinity();
    }
    return log_flux_residual(M, C0, grid, log_f);
}

// ---------------------------------------------------------------------------

namespace {

bool is_nonpositive_integer(double b) { return b <= 0.0 && b == std::floor(b); }

constexpr double kKummerTolerance = 1e-12;
constexpr int kKummerMaxTerms = 20000;

// Plain power series for z >= 0.
KummerSeries kummer_series_nonnegative(double a, double b, double z)
{
    KummerSeries s;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 0; k < kKummerMaxTerms; ++k) {
        const double ratio = (a + k) * z / ((b + k) * (k + 1.0));
        term *= ratio;
        sum += term;
        s.terms = k + 2;
        if (!std::isfinite(sum)) throw NumericalError("kummer_m: series overflow");
        if (term == 0.0) {
            s.remainder_bound = 0.0;
            s.value = sum;
            return s;
        }
        // Once the term ratio is below one and shrinking, the tail is bounded
        // by a geometric series with the next ratio.
        const double next = std::fabs((a + k + 1) * z / ((b + k + 1) * (k + 2.0)));
        if (next < 1.0 && k + 1 > std::fabs(b) && k + 1 > std::fabs(a)) {
            s.remainder_bound = std::fabs(term) * next / (1.0 - next);
            if (s.remainder_bound <= kKummerTolerance * std::fabs(sum)) {
                s.value = sum;
                return s;
            }
        }
    }
    throw NumericalError("kummer_m: series did not converge");
}

}  // namespace

KummerSeries kummer_m_series(double a, double b, double z)
{
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(z)) throw DomainError("kummer_m: non-finite argument");
    if (is_nonpositive_integer(b)) throw DomainError("kummer_m: b is a nonpositive integer (pole)");
    if (std::fabs(z) > 700.0) throw NumericalError("kummer_m: |z| > 700 would overflow");
    if (z >= 0.0) return kummer_series_nonnegative(a, b, z);
    KummerSeries s = kummer_series_nonnegative(b - a, b, -z);
    s.value *= std::exp(z);
    s.remainder_bound *= std::exp(z);
    s.transformed = true;
    return s;
}

double kummer_m(double a, double b, double z) { return kummer_m_series(a, b, z).value; }

EigenMode eigenmode_params(int n, double M)
{
    if (n < 0) throw DomainError("eigenmode: n must be >= 0");
    if (!(M > 0.0)) throw DomainError("eigenmode: M must be positive");
    EigenMode mode;
    mode.n = n;
    mode.omega = 2.0 * std::numbers::pi * n;
    const double root = std::sqrt((1.0 + M) * (1.0 + M) + 4.0 * mode.omega);
    mode.alpha_plus = (3.0 + M + root) / 2.0;
    mode.alpha_minus = (3.0 + M - root) / 2.0;
    mode.beta_plus = 1.0 + root;
    mode.beta_minus = 1.0 - root;
    if (n == 0) {
        // The roots reduce exactly; rounding in the sqrt would leave alpha+ a few
        // ulps away from beta+, and M(b - a, b, c/y) amplifies that by e^{c/y}.
        mode.alpha_plus = mode.beta_plus = M + 2.0;
        mode.alpha_minus = 1.0;
        mode.beta_minus = -M;
    }
    mode.minus_branch_pole = is_nonpositive_integer(mode.beta_minus);
    return mode;
}

double eigenmode_eval(const EigenMode& mode, double y)
{
    if (!(y > 0.0)) throw DomainError("eigenmode_eval: y must be positive");
    if (!(mode.c > 0.0)) throw DomainError("eigenmode_eval: c must be positive");
    const double ratio = mode.c / y;
    double g = 0.0;
    if (mode.A1 != 0.0) {
        if (mode.minus_branch_pole) throw DomainError("eigenmode_eval: beta- is a nonpositive integer");
        g += mode.A1 * std::pow(ratio, mode.alpha_minus) * kummer_m(mode.alpha_minus, mode.beta_minus, -ratio);
    }
    if (mode.A2 != 0.0)
        g += mode.A2 * std::pow(ratio, mode.alpha_plus) * kummer_m(mode.alpha_plus, mode.beta_plus, -ratio);
    return g;
}

OperatorResidual eigenmode_operator_residual(const EigenMode& mode, double M, double C,
                                             std::span<const double> grid)
{
    check_grid(grid);
    const std::size_t n = grid.size();
    std::vector<double> x(n), g(n);
    for (std::size_t j = 0; j < n; ++j) {
        x[j] = std::log(grid[j]);
        g[j] = eigenmode_eval(mode, grid[j]);
    }
    // In x = log y the operator reads g_xx + (M + 3 - C/y) g_x + (M + 2) g.
    double worst_growth = 0.0, worst_decay = 0.0, max_lg = 0.0, max_wg = 0.0;
    for (std::size_t j = 1; j + 1 < n; ++j) {
        const double hm = x[j] - x[j - 1];
        const double hp = x[j + 1] - x[j];
        const double gx = (g[j + 1] * hm * hm - g[j - 1] * hp * hp + g[j] * (hp * hp - hm * hm)) / (hm * hp * (hm + hp));
        const double gxx = 2.0 * (g[j + 1] * hm + g[j - 1] * hp - g[j] * (hm + hp)) / (hm * hp * (hm + hp));
        const double lg = gxx + (M + 3.0 - C / grid[j]) * gx + (M + 2.0) * g[j];
        const double wg = mode.omega * g[j];
        worst_growth = std::max(worst_growth, std::fabs(lg - wg));
        worst_decay = std::max(worst_decay, std::fabs(lg + wg));
        max_lg = std::max(max_lg, std::fabs(lg));
        max_wg = std::max(max_wg, std::fabs(wg));
    }
    const double scale = max_lg + max_wg;
    if (!(scale > 0.0)) return {};
    return {worst_growth / scale, worst_decay / scale};
}

}  // namespace income
