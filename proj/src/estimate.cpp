#include "income/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "income/error.hpp"
#include "income/io.hpp"

namespace income {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

// ---------------------------------------------------------------------------
// Nelder–Mead

SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& objective, std::vector<double> x0,
                          std::vector<double> step, const SimplexOptions& options)
{
    const std::size_t n = x0.size();
    if (n == 0 || step.size() != n) throw ValidationError("nelder_mead: bad dimensions");

    int evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        const double v = objective(x);
        return std::isnan(v) ? kInf : v;
    };

    std::vector<std::vector<double>> pts(n + 1);
    std::vector<double> vals(n + 1);
    auto build = [&](const std::vector<double>& center) {
        for (std::size_t v = 0; v <= n; ++v) {
            pts[v] = center;
            if (v > 0) pts[v][v - 1] += step[v - 1];
            vals[v] = eval(pts[v]);
        }
    };
    auto order = [&] {
        std::vector<std::size_t> idx(n + 1);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        std::vector<std::vector<double>> p2(n + 1);
        std::vector<double> v2(n + 1);
        for (std::size_t k = 0; k <= n; ++k) {
            p2[k] = std::move(pts[idx[k]]);
            v2[k] = vals[idx[k]];
        }
        pts = std::move(p2);
        vals = std::move(v2);
    };
    auto diameter = [&] {
        double d = 0.0;
        for (std::size_t v = 1; v <= n; ++v)
            for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::fabs(pts[v][i] - pts[0][i]));
        return d;
    };
    auto affine = [&](const std::vector<double>& a, const std::vector<double>& b, double t) {
        // a + t (b - a)
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) r[i] = a[i] + t * (b[i] - a[i]);
        return r;
    };

    build(x0);
    SimplexResult result;
    double previous_best = kInf;
    for (int round = 0;; ++round) {
        bool converged = false;
        while (true) {
            order();
            if (diameter() < options.tolerance) {
                converged = true;
                break;
            }
            if (evals >= options.max_evaluations) break;

            std::vector<double> centroid(n, 0.0);
            for (std::size_t v = 0; v < n; ++v)
                for (std::size_t i = 0; i < n; ++i) centroid[i] += pts[v][i] / static_cast<double>(n);

            const auto xr = affine(centroid, pts[n], -1.0);
            const double fr = eval(xr);
            if (fr < vals[0]) {
                const auto xe = affine(centroid, pts[n], -2.0);
                const double fe = eval(xe);
                if (fe < fr) {
                    pts[n] = xe;
                    vals[n] = fe;
                } else {
                    pts[n] = xr;
                    vals[n] = fr;
                }
                continue;
            }
            if (fr < vals[n - 1]) {
                pts[n] = xr;
                vals[n] = fr;
                continue;
            }
            const bool outside = fr < vals[n];
            const auto xc = outside ? affine(centroid, xr, 0.5) : affine(centroid, pts[n], 0.5);
            const double fc = eval(xc);
            if (outside ? fc <= fr : fc < vals[n]) {
                pts[n] = xc;
                vals[n] = fc;
                continue;
            }
            for (std::size_t v = 1; v <= n; ++v) {
                pts[v] = affine(pts[0], pts[v], 0.5);
                vals[v] = eval(pts[v]);
            }
        }

        result.x = pts[0];
        result.value = vals[0];
        result.diameter = diameter();
        result.converged = converged;
        result.evaluations = evals;

        // Restart around the optimum: the simplex can collapse prematurely
        // on a curved valley.  Stop once a restart no longer helps.
        const bool stalled = previous_best - vals[0] <= 1e-14 * (1.0 + std::fabs(vals[0]));
        if (!converged || round >= options.max_restarts || stalled) break;
        previous_best = vals[0];
        build(pts[0]);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Steady-state fit

std::vector<double> band_edges(const BandedDistribution& round)
{
    std::vector<double> edges;
    edges.reserve(round.bands.size() + 1);
    for (const Band& b : round.bands) edges.push_back(b.lower);
    edges.push_back(round.bands.back().upper);
    return edges;
}

namespace {

// Band probabilities conditional on the round's support.  Empty when the
// parameters put no mass there.
std::vector<double> conditional_probabilities(std::span<const double> edges, double M, double C0, double offset)
{
    auto p = band_probabilities(SteadyStateIPDF(M, C0, offset), edges);
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    if (!(total > 0.0)) return {};
    for (double& v : p) v /= total;
    return p;
}

double log_likelihood(const BandedDistribution& round, std::span<const double> edges, double M, double C0,
                      double offset)
{
    const auto p = conditional_probabilities(edges, M, C0, offset);
    if (p.empty()) return -kInf;
    double ll = 0.0;
    for (std::size_t b = 0; b < p.size(); ++b) {
        const double share = round.bands[b].population_share;
        if (share == 0.0) continue;
        if (!(p[b] > 0.0)) return -kInf;
        ll += share * std::log(p[b]);
    }
    return ll;
}

}  // namespace

double band_log_likelihood(const BandedDistribution& round, double M, double C0, double offset)
{
    return log_likelihood(round, band_edges(round), M, C0, offset);
}

FitResult fit_ipdf(const BandedDistribution& round, const FitOptions& options)
{
    if (round.bands.size() < 4)
        throw ValidationError("fit: round '" + round.round_id + "' has " + std::to_string(round.bands.size()) +
                              " bands; at least 4 are needed");
    const auto occupied = std::count_if(round.bands.begin(), round.bands.end(),
                                        [](const Band& b) { return b.population_share > 0.0; });
    if (occupied < 2) throw ValidationError("fit: round '" + round.round_id + "' is degenerate (one occupied band)");
    if (options.fix_offset && !(*options.fix_offset >= 0.0)) throw ValidationError("fit: offset must be >= 0");

    const auto edges = band_edges(round);
    const double mean = mean_income(round);
    const bool fit_offset = !options.fix_offset.has_value();
    const bool free_c0 = options.c0_mode == C0Mode::fit;

    // theta = (log M [, log C0] [, log offset])
    auto unpack = [&](std::span<const double> th, double& M, double& C0, double& offset) {
        M = std::exp(th[0]);
        offset = fit_offset ? std::exp(th.back()) : *options.fix_offset;
        C0 = free_c0 ? std::exp(th[1]) : M * (mean - offset);
    };
    auto objective = [&](std::span<const double> th) {
        double M, C0, offset;
        unpack(th, M, C0, offset);
        if (!(M > 1e-3 && M < 1e3) || !(C0 > 0.0) || !std::isfinite(C0) || !std::isfinite(offset)) return kInf;
        try {
            return -log_likelihood(round, edges, M, C0, offset);
        } catch (const NumericalError&) {
            return kInf;
        }
    };

    const double offset0 = fit_offset ? 0.15 * mean : *options.fix_offset;
    const double mu = mean - offset0;
    if (!(mu > 0.0)) throw ValidationError("fit: offset exceeds the round's mean income");

    struct Start {
        double M, C0;
    };
    std::vector<Start> starts;
    if (free_c0)
        starts = {{0.8, 0.8 * mu}, {1.6, 1.6 * mu}, {3.0, 3.0 * mu}, {1.6, 0.8 * mu}, {1.6, 3.2 * mu}};
    else
        starts = {{0.8, 0}, {1.6, 0}, {3.0, 0}, {1.2, 0}, {2.2, 0}};

    int budget = options.max_evaluations;
    int used = 0;
    SimplexResult best;
    double best_M = kInf;
    bool have_best = false;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        std::vector<double> x0{std::log(starts[s].M)};
        if (free_c0) x0.push_back(std::log(starts[s].C0));
        if (fit_offset) x0.push_back(std::log(offset0));
        SimplexOptions so;
        so.tolerance = options.tolerance;
        so.max_evaluations = std::max(1, (budget - used) / static_cast<int>(starts.size() - s));
        const auto r = nelder_mead(objective, x0, std::vector<double>(x0.size(), 0.2), so);
        used += r.evaluations;

        const double M = std::exp(r.x[0]);
        const double tie = 1e-12 * std::max(1.0, std::fabs(r.value));
        if (!have_best || r.value < best.value - tie || (std::fabs(r.value - best.value) <= tie && M < best_M)) {
            best = r;
            best_M = M;
            have_best = true;
        }
    }
    if (!std::isfinite(best.value))
        throw NumericalError("fit: no start reached a finite likelihood for round '" + round.round_id + "'");

    FitResult out;
    unpack(best.x, out.M, out.C0, out.offset);
    out.log_likelihood = -best.value;
    out.converged = best.converged;
    out.n_evaluations = used;
    out.simplex_diameter = best.diameter;
    out.per_band_expected_shares = conditional_probabilities(edges, out.M, out.C0, out.offset);
    return out;
}

FitResult fit_ipdf_collapsed(const BandedDistribution& round, const FitOptions& options)
{
    const double m = mean_income(round);
    FitResult r = fit_ipdf(collapse_rescale(round, 1.0), options);
    r.C0 *= m;
    r.offset *= m;
    return r;
}

// ---------------------------------------------------------------------------
// Monod curve

double monod_rss(std::span<const double> incomes, std::span<const double> cereal, double V, double K)
{
    double rss = 0.0;
    for (std::size_t i = 0; i < incomes.size(); ++i) {
        const double r = cereal[i] - V * incomes[i] / (K + incomes[i]);
        rss += r * r;
    }
    return rss;
}

MonodFit fit_monod(std::span<const double> incomes, std::span<const double> cereal)
{
    if (incomes.size() != cereal.size()) throw ValidationError("monod: income and cereal lengths differ");
    if (incomes.size() < 3) throw ValidationError("monod: at least 3 bands are needed");
    for (std::size_t i = 0; i < incomes.size(); ++i) {
        if (!(incomes[i] > 0.0) || !std::isfinite(incomes[i])) throw ValidationError("monod: incomes must be positive");
        if (!std::isfinite(cereal[i])) throw ValidationError("monod: cereal expenditure must be finite");
    }

    auto solve_v = [&](double K) {
        double sg = 0.0, gg = 0.0;
        for (std::size_t i = 0; i < incomes.size(); ++i) {
            const double g = incomes[i] / (K + incomes[i]);
            sg += cereal[i] * g;
            gg += g * g;
        }
        return sg / gg;
    };
    auto rss_at = [&](double log_k) {
        const double K = std::exp(log_k);
        return monod_rss(incomes, cereal, solve_v(K), K);
    };

    const auto [lo_it, hi_it] = std::minmax_element(incomes.begin(), incomes.end());
    const double lo = std::log(*lo_it / 10.0);
    const double hi = std::log(*hi_it * 10.0);

    // Coarse scan picks the basin, golden section refines it.
    constexpr int scan = 200;
    int best_i = 0;
    double best_rss = kInf;
    for (int i = 0; i <= scan; ++i) {
        const double r = rss_at(lo + (hi - lo) * i / scan);
        if (r < best_rss) {
            best_rss = r;
            best_i = i;
        }
    }
    double a = lo + (hi - lo) * std::max(best_i - 1, 0) / scan;
    double b = lo + (hi - lo) * std::min(best_i + 1, scan) / scan;
    double best_x = lo + (hi - lo) * best_i / scan;

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = rss_at(c), fd = rss_at(d);
    while (b - a > 1e-13 * std::max(1.0, std::fabs(a))) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = rss_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = rss_at(d);
        }
        if (fc < best_rss) best_rss = fc, best_x = c;
        if (fd < best_rss) best_rss = fd, best_x = d;
    }

    MonodFit fit;
    fit.K = std::exp(best_x);
    fit.V = solve_v(fit.K);
    if (!(fit.V > 0.0)) throw ValidationError("monod: cereal expenditures give a nonpositive saturation level V");
    fit.rss = monod_rss(incomes, cereal, fit.V, fit.K);
    const double edge_tol = 1e-6 * (hi - lo);
    fit.at_boundary = best_x - lo < edge_tol || hi - best_x < edge_tol;
    return fit;
}

MonodFit fit_monod(const BandedDistribution& round)
{
    std::vector<double> y, s;
    for (std::size_t b = 0; b < round.bands.size(); ++b) {
        const Band& band = round.bands[b];
        if (!band.mean_cereal_expenditure)
            throw ValidationError("monod: round '" + round.round_id + "' lacks cereal expenditure in band " +
                                  std::to_string(b));
        y.push_back(representative_income(round, b));
        s.push_back(*band.mean_cereal_expenditure);
    }
    return fit_monod(y, s);
}

// ---------------------------------------------------------------------------
// Labour rate

PiecewiseLinear labour_rate_series(std::span<const RoundMean> means, double M, Diagnostics* diag)
{
    if (!(M > 0.0)) throw ValidationError("labour rate: M must be positive");
    if (means.empty()) throw ValidationError("labour rate: no rounds");
    std::vector<RoundMean> sorted(means.begin(), means.end());
    std::sort(sorted.begin(), sorted.end(), [](const RoundMean& a, const RoundMean& b) { return a.year < b.year; });
    std::vector<double> t, c;
    for (const auto& r : sorted) {
        if (!(r.mean > 0.0)) throw ValidationError("labour rate: mean model income must be positive");
        if (!t.empty() && r.year == t.back())
            throw ValidationError("labour rate: two rounds share year " + io::format_number(r.year));
        t.push_back(r.year);
        c.push_back(M * r.mean);
    }
    if (t.size() == 1) {
        if (diag) diag->warn("labour rate: single round; C(t) held constant");
        return PiecewiseLinear(c.front());
    }
    return PiecewiseLinear(std::move(t), std::move(c));
}

PiecewiseLinear labour_rate_series(std::span<const BandedDistribution> rounds, std::span<const FitResult> fits,
                                   Diagnostics* diag)
{
    if (rounds.size() != fits.size()) throw ValidationError("labour rate: rounds and fits are misaligned");
    if (rounds.empty()) throw ValidationError("labour rate: no rounds");
    double M = 0.0;
    std::vector<RoundMean> means;
    for (std::size_t i = 0; i < rounds.size(); ++i) {
        M += fits[i].M / static_cast<double>(fits.size());
        means.push_back({rounds[i].year, mean_income(rounds[i]) - fits[i].offset});
    }
    return labour_rate_series(means, M, diag);
}

}  // namespace income
