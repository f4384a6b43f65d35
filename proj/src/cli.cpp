#include "income/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "income/distlib.hpp"
#include "income/error.hpp"
#include "income/estimate.hpp"
#include "income/fpsolve.hpp"
#include "income/io.hpp"
#include "income/poverty.hpp"
#include "income/rng.hpp"
#include "income/simulate.hpp"
#include "income/survey.hpp"

namespace income {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using io::format_number;

constexpr const char* kTool = "incomesim";
constexpr int kManifestFormat = 1;

std::vector<double> parse_list(const std::string& text, const std::string& what)
{
    std::vector<double> out;
    if (text.empty()) return out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const double v = io::parse_number(item, what);
        if (std::isnan(v)) throw UsageError(what + ": empty list element");
        out.push_back(v);
    }
    return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Records every option of a subcommand so the resolved configuration can be
// written to the manifest and turned back into arguments on replay.
class Config {
public:
    explicit Config(CLI::App* app) : app_(app) {}

    template <class T>
    CLI::Option* option(const std::string& name, T& var, const std::string& help)
    {
        dumpers_.emplace_back([name, &var](json& j) { j[name] = var; });
        return app_->add_option("--" + name, var, help)->capture_default_str();
    }

    /// Input path, stored in absolute form.
    CLI::Option* path(const std::string& name, std::string& var, const std::string& help)
    {
        paths_.push_back(&var);
        return option(name, var, help);
    }

    CLI::Option* flag(const std::string& name, bool& var, const std::string& help)
    {
        dumpers_.emplace_back([name, &var](json& j) { j[name] = var; });
        return app_->add_flag("--" + name, var, help);
    }

    json resolve()
    {
        for (std::string* p : paths_)
            if (!p->empty()) *p = fs::absolute(*p).lexically_normal().string();
        json j = json::object();
        for (const auto& d : dumpers_) d(j);
        return j;
    }

    CLI::App* app() const { return app_; }

private:
    CLI::App* app_;
    std::vector<std::function<void(json&)>> dumpers_;
    std::vector<std::string*> paths_;
};

struct Globals {
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    bool quiet = false;
    int threads = 0;
};

class Output {
public:
    Output(fs::path dir, std::ostream& log, bool quiet) : dir_(std::move(dir)), log_(log), quiet_(quiet) {}

    void write(const std::string& name, std::string_view text)
    {
        io::write_text(dir_ / name, text);
        files_.push_back(name);
    }
    std::ostream& log() { return quiet_ ? null_ : log_; }
    const std::vector<std::string>& files() const { return files_; }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    std::ostream& log_;
    bool quiet_;
    std::ostringstream null_;
    std::vector<std::string> files_;
};

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---------------------------------------------------------------------------
// Commands

struct Command {
    virtual ~Command() = default;
    virtual void run(const Globals& g, Output& out) = 0;
};

struct SimulateCmd : Command {
    double M = 1.6, C = 1.6, sigma = std::sqrt(2.0), dt = 1e-3, t_end = 50.0, y0 = 0.0, tail_fraction = 0.05;
    std::uint64_t agents = 100000;
    std::string init = "constant", snapshots;
    int bins = 60;
    bool write_incomes = false;

    void add(Config& c)
    {
        c.option("M", M, "Exchange rate parameter M");
        c.option("C", C, "Labour rate C (constant)");
        c.option("sigma", sigma, "Noise scale");
        c.option("dt", dt, "Time step");
        c.option("agents", agents, "Number of agents");
        c.option("t-end", t_end, "Simulated time");
        c.option("init", init, "Initial state: constant or equilibrium");
        c.option("y0", y0, "Constant starting income (0 selects C/M)");
        c.option("snapshots", snapshots, "Comma-separated snapshot times (t-end is always included)");
        c.option("bins", bins, "Histogram bins");
        c.option("tail-fraction", tail_fraction, "Tail fraction for the Hill estimate");
        c.flag("write-incomes", write_incomes, "Also write the final incomes");
    }

    void run(const Globals& g, Output& out) override
    {
        if (agents == 0) throw UsageError("--agents must be positive");
        if (!(t_end > 0.0)) throw UsageError("--t-end must be positive");
        if (bins < 1) throw UsageError("--bins must be positive");
        LangevinParams params;
        params.M = M;
        params.labour_rate = PiecewiseLinear(C);
        params.sigma = sigma;
        params.dt = dt;
        try {
            params.validate();
        } catch (const ValidationError& e) {
            throw UsageError(e.what());
        }
        const SteadyStateIPDF dist(M, C);
        if (init != "equilibrium" && init != "constant")
            throw UsageError("--init must be 'constant' or 'equilibrium'");
        const InitialState start = init == "equilibrium" ? InitialState(dist) : InitialState(y0 > 0.0 ? y0 : C / M);

        auto times = parse_list(snapshots, "--snapshots");
        for (double t : times)
            if (!(t > 0.0 && t <= t_end)) throw UsageError("snapshot times must lie in (0, t-end]");
        if (std::find(times.begin(), times.end(), t_end) == times.end()) times.push_back(t_end);
        std::sort(times.begin(), times.end());

        const auto pops = income::run(agents, params, t_end, start, g.seed, times, ParallelOptions{g.threads});

        const double mean = C / M;
        std::vector<double> edges = make_log_grid(1e-2 * mean, 1e2 * mean, static_cast<std::size_t>(bins) + 1);
        const auto probs = band_probabilities(dist, edges);

        io::CsvWriter hist({"t", "bin_lower", "bin_upper", "density", "analytic_density"});
        json snaps = json::array();
        for (const auto& pop : pops) {
            const double t = pop.time(dt);
            std::vector<std::uint64_t> counts(static_cast<std::size_t>(bins), 0);
            for (double y : pop.incomes) {
                const auto it = std::upper_bound(edges.begin(), edges.end(), y);
                if (it == edges.begin() || it == edges.end()) continue;
                ++counts[static_cast<std::size_t>(it - edges.begin()) - 1];
            }
            const double n = static_cast<double>(pop.size());
            for (std::size_t b = 0; b < counts.size(); ++b) {
                const double w = edges[b + 1] - edges[b];
                hist.row({format_number(t), format_number(edges[b]), format_number(edges[b + 1]),
                          format_number(static_cast<double>(counts[b]) / (n * w)), format_number(probs[b] / w)});
            }

            double sum = 0.0, sq = 0.0;
            for (double y : pop.incomes) sum += y;
            const double m = sum / n;
            for (double y : pop.incomes) sq += (y - m) * (y - m);
            double hill = std::numeric_limits<double>::quiet_NaN();
            if (tail_fraction * n >= 100.0) hill = hill_tail_exponent(pop.incomes, tail_fraction);
            const double ks = ks_distance(pop.incomes, dist);
            snaps.push_back({{"t", t},
                             {"ks", ks},
                             {"hill_exponent", nullable(hill)},
                             {"mean", m},
                             {"mean_standard_error", std::sqrt(sq / (n * (n - 1.0 > 0 ? n - 1.0 : 1.0)))}});
            out.log() << "t=" << format_number(t) << " ks=" << format_number(ks)
                      << " hill=" << format_number(hill) << " mean=" << format_number(m) << "\n";
        }
        out.write("histogram.csv", hist.str());
        json report{{"analytic", {{"M", M}, {"C0", C}, {"mean", mean}, {"tail_exponent", M + 2.0}}},
                    {"agents", agents},
                    {"snapshots", snaps}};
        out.write("report.json", dump(report));

        if (write_incomes) {
            io::CsvWriter inc({"agent", "income"});
            const auto& last = pops.back();
            for (std::size_t i = 0; i < last.size(); ++i) inc.row({std::to_string(i), format_number(last.incomes[i])});
            out.write("incomes.csv", inc.str());
        }
    }
};

struct SynthCmd : Command {
    double M = 1.6, C0 = 1.6, offset = 0.0, V = 0.0, K = 0.0, noise = 0.0, year = 2000.0;
    std::uint64_t population = 1000000;
    int bands = 20;
    std::string edges, round_id = "synthetic", scales = "1", years;

    void add(Config& c)
    {
        c.option("M", M, "Shape M");
        c.option("C0", C0, "Scale C0 (model income units)");
        c.option("offset", offset, "Starvation offset added to model income");
        c.option("bands", bands, "Number of equal-probability bands (ignored with --edges)");
        c.option("edges", edges, "Comma-separated band edges in observed income; last may be inf");
        c.option("population", population, "Households per round");
        c.option("V", V, "Monod saturation level, scaled with income (with --K adds cereal expenditure)");
        c.option("K", K, "Monod half-saturation income");
        c.option("noise", noise, "Relative Gaussian noise on cereal expenditure");
        c.option("round-id", round_id, "Round identifier (suffixed with the year for several rounds)");
        c.option("year", year, "Survey year of the first round");
        c.option("scales", scales, "Comma-separated income scale factor per round");
        c.option("years", years, "Comma-separated year per round (default: consecutive)");
    }

    void run(const Globals& g, Output& out) override
    {
        if (population == 0) throw UsageError("--population must be positive");
        const auto scale_list = parse_list(scales, "--scales");
        const auto year_list = parse_list(years, "--years");
        if (scale_list.empty()) throw UsageError("--scales must not be empty");
        if (!year_list.empty() && year_list.size() != scale_list.size())
            throw UsageError("--years and --scales must have the same length");
        const bool monod = V > 0.0 || K > 0.0;
        if (monod && !(V > 0.0 && K > 0.0)) throw UsageError("--V and --K must both be positive");
        if (noise < 0.0) throw UsageError("--noise must be >= 0");
        const auto explicit_edges = parse_list(edges, "--edges");

        std::vector<BandedDistribution> rounds;
        for (std::size_t k = 0; k < scale_list.size(); ++k) {
            const double s = scale_list[k];
            if (!(s > 0.0)) throw UsageError("--scales entries must be positive");
            const SteadyStateIPDF dist(M, C0 * s, offset * s);
            std::vector<double> e;
            if (explicit_edges.empty()) {
                if (bands < 2) throw UsageError("--bands must be at least 2");
                e = quantile_edges(dist, static_cast<std::size_t>(bands));
            } else {
                for (double v : explicit_edges) e.push_back(v * s);
            }
            SynthOptions opts;
            opts.year = year_list.empty() ? year + static_cast<double>(k) : year_list[k];
            opts.round_id = scale_list.size() == 1 ? round_id : round_id + "_" + format_number(opts.year);
            if (monod) opts.monod = MonodParams{V * s, K * s};
            BandedDistribution round = synth_round(dist, e, population, g.seed + k, opts);
            if (monod && noise > 0.0) {
                CounterStream stream(g.seed + k, StreamDomain::survey, 0xFFFFFFFFu);
                for (Band& b : round.bands) {
                    double v = *b.mean_cereal_expenditure * (1.0 + noise * stream.normal());
                    v = std::max(v, 0.0);
                    if (b.mean_total_expenditure) v = std::min(v, *b.mean_total_expenditure);
                    b.mean_cereal_expenditure = v;
                }
            }
            rounds.push_back(std::move(round));
        }
        out.write("rounds.csv", format_rounds(rounds));
        out.log() << "wrote " << rounds.size() << " round(s) of " << rounds.front().bands.size() << " bands\n";
    }
};

C0Mode parse_c0_mode(const std::string& s)
{
    if (s == "fit") return C0Mode::fit;
    if (s == "mean") return C0Mode::mean;
    throw UsageError("--c0-mode must be 'fit' or 'mean'");
}

json fit_json(const FitResult& f)
{
    return {{"M", f.M},
            {"C0", f.C0},
            {"offset", f.offset},
            {"log_likelihood", f.log_likelihood},
            {"converged", f.converged},
            {"n_evaluations", f.n_evaluations},
            {"simplex_diameter", f.simplex_diameter}};
}

json monod_json(const MonodFit& m)
{
    return {{"V", m.V}, {"K", m.K}, {"rss", m.rss}, {"K_at_boundary", m.at_boundary}};
}

bool has_cereal(const BandedDistribution& r)
{
    return r.bands.size() >= 3 &&
           std::all_of(r.bands.begin(), r.bands.end(), [](const Band& b) { return b.mean_cereal_expenditure.has_value(); });
}

std::vector<BandedDistribution> deflate_all(std::vector<BandedDistribution> rounds, const std::string& deflators,
                                            double reference_year, std::vector<double>* ratios = nullptr)
{
    if (deflators.empty()) {
        if (ratios) ratios->assign(rounds.size(), 1.0);
        return rounds;
    }
    const DeflatorTable table = load_deflators(deflators, reference_year);
    for (auto& r : rounds) {
        if (ratios) ratios->push_back(table.ratio(r.year));
        r = deflate(r, table);
    }
    return rounds;
}

struct FitCmd : Command {
    std::string rounds, round_id, c0_mode = "fit";
    double offset = 0.15;
    bool fit_offset = false, raw = false;

    void add(Config& c)
    {
        c.path("rounds", rounds, "Rounds CSV")->required();
        c.option("round-id", round_id, "Fit only this round");
        c.option("offset", offset, "Fixed starvation offset (collapsed units unless --raw)");
        c.flag("fit-offset", fit_offset, "Fit the offset instead of fixing it");
        c.option("c0-mode", c0_mode, "fit: free C0; mean: C0 = M * (mean - offset)");
        c.flag("raw", raw, "Fit in the file's units instead of rescaling to mean 1");
    }

    void run(const Globals&, Output& out) override
    {
        FitOptions opts;
        opts.c0_mode = parse_c0_mode(c0_mode);
        if (!fit_offset) opts.fix_offset = offset;
        else opts.fix_offset.reset();

        Diagnostics diag;
        auto all = load_rounds(rounds, &diag);
        if (!round_id.empty()) {
            std::erase_if(all, [&](const BandedDistribution& r) { return r.round_id != round_id; });
            if (all.empty()) throw ValidationError("no round '" + round_id + "' in " + rounds);
        }

        io::CsvWriter shares({"round_id", "band", "band_lower", "band_upper", "observed_share", "expected_share"});
        json results = json::array();
        for (const auto& r : all) {
            const FitResult f = raw ? fit_ipdf(r, opts) : fit_ipdf_collapsed(r, opts);
            json entry{{"round_id", r.round_id}, {"year", r.year}, {"mean_income", mean_income(r)}};
            entry["fit"] = fit_json(f);
            entry["monod"] = has_cereal(r) ? monod_json(fit_monod(r)) : json(nullptr);
            results.push_back(entry);
            for (std::size_t b = 0; b < r.bands.size(); ++b)
                shares.row({r.round_id, std::to_string(b), format_number(r.bands[b].lower),
                            format_number(r.bands[b].upper), format_number(r.bands[b].population_share),
                            format_number(f.per_band_expected_shares[b])});
            out.log() << r.round_id << ": M=" << format_number(f.M) << " C0=" << format_number(f.C0)
                      << " offset=" << format_number(f.offset) << (f.converged ? "" : " (not converged)") << "\n";
        }
        out.write("fit.json", dump(json{{"rounds", results}, {"warnings", diag.warnings}}));
        out.write("shares.csv", shares.str());
    }
};

struct CollapseCmd : Command {
    std::string rounds, deflators;
    double reference_year = 0.0, target_mean = 1.0, M = 0.0, C0 = 0.0, offset = 0.15;
    int grid = 200;

    void add(Config& c)
    {
        c.path("rounds", rounds, "Rounds CSV")->required();
        c.path("deflators", deflators, "Deflators CSV (year,cpi)");
        c.option("reference-year", reference_year, "Reference year of the deflators");
        c.option("target-mean", target_mean, "Common mean after rescaling");
        c.option("M", M, "Overlay shape (0: average of per-round fits)");
        c.option("C0", C0, "Overlay scale in collapsed units");
        c.option("offset", offset, "Overlay offset in units of the target mean");
        c.option("grid", grid, "Points of the analytic overlay and spread grid");
    }

    void run(const Globals&, Output& out) override
    {
        if (!(target_mean > 0.0)) throw UsageError("--target-mean must be positive");
        if (grid < 2) throw UsageError("--grid must be at least 2");
        Diagnostics diag;
        std::vector<double> ratios;
        const auto deflated = deflate_all(load_rounds(rounds, &diag), deflators, reference_year, &ratios);

        std::vector<BandedDistribution> collapsed;
        json info = json::array();
        for (std::size_t i = 0; i < deflated.size(); ++i) {
            const double m = mean_income(deflated[i]);
            collapsed.push_back(collapse_rescale(deflated[i], target_mean));
            info.push_back({{"round_id", deflated[i].round_id},
                            {"year", deflated[i].year},
                            {"deflator_ratio", ratios[i]},
                            {"deflated_mean", m},
                            {"scale", target_mean / m}});
        }

        // Overlay parameters.
        double oM = M, oC0 = C0 * target_mean, oOff = offset * target_mean;
        bool overlay = M > 0.0 && C0 > 0.0;
        if (!overlay && std::all_of(collapsed.begin(), collapsed.end(),
                                    [](const BandedDistribution& r) { return r.bands.size() >= 4; })) {
            FitOptions opts;
            opts.fix_offset = offset;
            oM = oC0 = 0.0;
            for (const auto& r : collapsed) {
                const FitResult f = fit_ipdf_collapsed(r, opts);
                oM += f.M / static_cast<double>(collapsed.size());
                oC0 += f.C0 / static_cast<double>(collapsed.size());
            }
            overlay = true;
        }

        io::CsvWriter curves({"round_id", "year", "income", "cdf"});
        std::vector<EmpiricalCdf> cdfs;
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (const auto& r : collapsed) {
            const EmpiricalCdf& cdf = cdfs.emplace_back(r);
            for (std::size_t k = 0; k < cdf.edges().size(); ++k)
                curves.row({r.round_id, format_number(r.year), format_number(cdf.edges()[k]),
                            format_number(cdf.cumulative()[k])});
            for (double e : cdf.edges())
                if (e > 0.0) lo = std::min(lo, e), hi = std::max(hi, e);
        }
        out.write("collapsed_rounds.csv", format_rounds(collapsed));
        out.write("collapsed_cdf.csv", curves.str());

        const auto xs = make_log_grid(lo, hi, static_cast<std::size_t>(grid));
        double spread = 0.0;
        if (cdfs.size() > 1) {
            for (double x : xs) {
                double a = 1.0, b = 0.0;
                for (const auto& cdf : cdfs) a = std::min(a, cdf(x)), b = std::max(b, cdf(x));
                spread = std::max(spread, b - a);
            }
        }

        json report{{"target_mean", target_mean}, {"max_cdf_spread", spread}, {"rounds", info}};
        if (overlay) {
            const SteadyStateIPDF dist(oM, oC0, oOff);
            io::CsvWriter analytic({"income", "cdf"});
            for (double x : xs)
                analytic.row({format_number(x), format_number(x > oOff ? ipdf_cdf(dist, x - oOff) : 0.0)});
            out.write("analytic_cdf.csv", analytic.str());
            report["overlay"] = {{"M", oM}, {"C0", oC0}, {"offset", oOff}};
        } else {
            report["overlay"] = nullptr;
        }
        report["warnings"] = diag.warnings;
        out.write("report.json", dump(report));
        out.log() << collapsed.size() << " round(s) collapsed; max CDF spread " << format_number(spread) << "\n";
    }
};

struct IndicesCmd : Command {
    std::string rounds, deflators, c0_mode = "fit";
    double reference_year = 0.0, line = 0.0, offset = 0.15;
    bool fit_offset = false;

    void add(Config& c)
    {
        c.path("rounds", rounds, "Rounds CSV")->required();
        c.path("deflators", deflators, "Deflators CSV (year,cpi)");
        c.option("reference-year", reference_year, "Reference year of the deflators");
        c.option("line", line, "Poverty line in deflated income units")->required();
        c.option("offset", offset, "Starvation offset in collapsed units");
        c.flag("fit-offset", fit_offset, "Fit the offset per round");
        c.option("c0-mode", c0_mode, "fit: free C0; mean: C0 = M * (mean - offset)");
    }

    void run(const Globals&, Output& out) override
    {
        const PovertyLine z(line);
        FitOptions opts;
        opts.c0_mode = parse_c0_mode(c0_mode);
        if (!fit_offset) opts.fix_offset = offset;
        else opts.fix_offset.reset();

        Diagnostics diag;
        const auto deflated = deflate_all(load_rounds(rounds, &diag), deflators, reference_year);
        std::vector<FitResult> fits;
        std::vector<MonodFit> monods;
        for (const auto& r : deflated) {
            try {
                fits.push_back(fit_ipdf_collapsed(r, opts));
                monods.push_back(fit_monod(r));
            } catch (const Error& e) {
                throw Error(e.kind(), "round '" + r.round_id + "': " + e.what());
            }
        }
        const IndexSeries series = index_series(deflated, fits, monods, z, &diag);
        out.write("indices.csv", format_index_series(series));

        json rows = json::array();
        for (std::size_t i = 0; i < series.rows.size(); ++i) {
            const IndexRow& r = series.rows[i];
            rows.push_back({{"round_id", r.round_id},
                            {"year", r.year},
                            {"fit", fit_json(fits[i])},
                            {"monod", monod_json(r.monod)},
                            {"M", r.M},
                            {"C", r.C},
                            {"offset", r.offset},
                            {"pcd_direct", r.pcd_direct},
                            {"pcd_model", r.pcd_model},
                            {"pcd_banded", r.pcd_banded},
                            {"pcd_direct_normalized", r.pcd_direct / r.monod.V},
                            {"pcd_model_normalized", r.pcd_model / r.monod.V}});
            out.log() << r.round_id << ": hci=" << format_number(r.hci) << " pcd_direct=" << format_number(r.pcd_direct)
                      << " pcd_model=" << format_number(r.pcd_model) << "\n";
        }
        out.write("indices.json", dump(json{{"poverty_line", series.poverty_line}, {"rounds", rows}, {"warnings", diag.warnings}}));
    }
};

struct EvolveCmd : Command {
    double M = 1.6, C = 1.6, t_end = 20.0, dt = 0.01, center = 0.0, width = 0.05, report_every = 0.5;
    double grid_lo = 1e-3, grid_hi = 1e3;
    int points = 2000;
    std::string init = "bump";

    void add(Config& c)
    {
        c.option("M", M, "Shape M");
        c.option("C", C, "Labour rate C (constant)");
        c.option("points", points, "Grid points");
        c.option("grid-lo", grid_lo, "Lower grid end in units of C/M");
        c.option("grid-hi", grid_hi, "Upper grid end in units of C/M");
        c.option("init", init, "Initial density: bump or steady");
        c.option("center", center, "Bump centre (0 selects 3 C/M)");
        c.option("width", width, "Bump width in log income");
        c.option("t-end", t_end, "Final time");
        c.option("dt", dt, "Time step");
        c.option("report-every", report_every, "Interval between L1 reports");
    }

    void run(const Globals&, Output& out) override
    {
        if (points < 3) throw UsageError("--points must be at least 3");
        if (!(t_end > 0.0) || !(dt > 0.0) || !(report_every > 0.0)) throw UsageError("times must be positive");
        if (!(grid_lo > 0.0 && grid_hi > grid_lo)) throw UsageError("need 0 < grid-lo < grid-hi");
        const SteadyStateIPDF dist(M, C);
        const double mean = C / M;
        auto grid = make_log_grid(grid_lo * mean, grid_hi * mean, static_cast<std::size_t>(points));

        GridDensity f0;
        if (init == "bump") {
            f0 = bump_density(grid, center > 0.0 ? center : 3.0 * mean, width);
        } else if (init == "steady") {
            f0 = sample_density(dist, grid);
            const double m = f0.mass();
            for (double& v : f0.values) v /= m;
        } else {
            throw UsageError("--init must be 'bump' or 'steady'");
        }

        EvolveOptions opts;
        const auto n_reports = static_cast<long>(std::floor(t_end / report_every + 1e-9));
        for (long k = 1; k <= n_reports; ++k) opts.snapshot_times.push_back(static_cast<double>(k) * report_every);
        const EvolveResult res = evolve(f0, M, PiecewiseLinear(C), t_end, dt, opts);

        io::CsvWriter l1({"t", "l1", "mass"});
        l1.row({format_number(0.0), format_number(l1_distance(f0, dist)), format_number(f0.mass())});
        bool monotone = true;
        double previous = l1_distance(f0, dist);
        for (const auto& s : res.snapshots) {
            const double d = l1_distance(s, dist);
            if (d > previous + 1e-12) monotone = false;
            previous = d;
            l1.row({format_number(s.time), format_number(d), format_number(s.mass())});
        }
        out.write("l1.csv", l1.str());

        io::CsvWriter dens({"y", "density", "analytic_density"});
        for (std::size_t j = 0; j < grid.size(); ++j)
            dens.row({format_number(res.final.grid[j]), format_number(res.final.values[j]),
                      format_number(ipdf_density(dist, res.final.grid[j]))});
        out.write("final_density.csv", dens.str());

        const double final_l1 = l1_distance(res.final, dist);
        json report{{"final_time", res.final.time},
                    {"final_l1", final_l1},
                    {"l1_monotone", monotone},
                    {"max_mass_drift", res.max_mass_drift},
                    {"mass_drift_per_unit_time", res.max_mass_drift / res.final.time},
                    {"steady_state_residual", steady_state_residual(M, C, grid)}};
        out.write("report.json", dump(report));
        out.log() << "final L1 " << format_number(final_l1) << (monotone ? " (monotone)" : " (not monotone)") << "\n";
    }
};

struct ModesCmd : Command {
    double M = 1.6, c = 1.0, y_lo = 0.01, y_hi = 100.0, A1 = 1.0, A2 = 1.0;
    std::string n = "0,1,2";
    int points = 200;

    void add(Config& cfg)
    {
        cfg.option("M", M, "Shape M");
        cfg.option("c", c, "Scale c of the modes (the labour rate)");
        cfg.option("n", n, "Comma-separated mode indices");
        cfg.option("A1", A1, "Coefficient of the minus branch for n > 0");
        cfg.option("A2", A2, "Coefficient of the plus branch");
        cfg.option("y-lo", y_lo, "Lower end of the curve grid");
        cfg.option("y-hi", y_hi, "Upper end of the curve grid");
        cfg.option("points", points, "Curve grid points");
    }

    void run(const Globals&, Output& out) override
    {
        if (!(M > 0.0) || !(c > 0.0)) throw UsageError("--M and --c must be positive");
        if (points < 3 || !(y_lo > 0.0 && y_hi > y_lo)) throw UsageError("bad curve grid");
        std::vector<int> ns;
        for (double v : parse_list(n, "--n")) {
            if (v < 0.0 || v != std::floor(v)) throw UsageError("--n entries must be nonnegative integers");
            ns.push_back(static_cast<int>(v));
        }
        if (ns.empty()) throw UsageError("--n must not be empty");
        const auto ys = make_log_grid(y_lo, y_hi, static_cast<std::size_t>(points));

        io::CsvWriter table({"n", "omega", "alpha_plus", "alpha_minus", "beta_plus", "beta_minus", "minus_branch_pole"});
        std::vector<std::string> header{"y"};
        std::vector<EigenMode> modes;
        json residuals = json::array();
        for (int k : ns) {
            EigenMode mode = eigenmode_params(k, M);
            mode.c = c;
            mode.A2 = A2;
            mode.A1 = (k == 0 || mode.minus_branch_pole) ? 0.0 : A1;
            table.row({std::to_string(k), format_number(mode.omega), format_number(mode.alpha_plus),
                       format_number(mode.alpha_minus), format_number(mode.beta_plus), format_number(mode.beta_minus),
                       mode.minus_branch_pole ? "1" : "0"});
            header.push_back("g_" + std::to_string(k));
            const OperatorResidual r = eigenmode_operator_residual(mode, M, c, ys);
            residuals.push_back({{"n", k}, {"growth", r.growth}, {"decay", r.decay}});
            modes.push_back(mode);
        }
        out.write("modes.csv", table.str());

        io::CsvWriter curves(header);
        for (double y : ys) {
            std::vector<std::string> row{format_number(y)};
            for (const auto& mode : modes) row.push_back(format_number(eigenmode_eval(mode, y)));
            curves.row(row);
        }
        out.write("curves.csv", curves.str());

        json report{{"M", M}, {"c", c}, {"operator_residuals", residuals}};
        // The n = 0 plus branch is the steady state up to c Γ(M+1).
        EigenMode zero = eigenmode_params(0, M);
        zero.c = c;
        zero.A1 = 0.0;
        zero.A2 = 1.0;
        const SteadyStateIPDF dist(M, c);
        const double norm = c * std::exp(std::lgamma(M + 1.0));
        double worst = 0.0;
        for (double y : ys) {
            const double f = ipdf_density(dist, y);
            if (f > 0.0) worst = std::max(worst, std::fabs(eigenmode_eval(zero, y) / norm - f) / f);
        }
        report["steady_state_recovery"] = {{"max_relative_error", worst}, {"pass", worst < 1e-10}};
        out.write("report.json", dump(report));
        out.log() << "n=0 steady-state recovery: max relative error " << format_number(worst) << "\n";
    }
};

// ---------------------------------------------------------------------------

std::vector<std::string> replay_arguments(const fs::path& manifest_path, const Globals& g, bool out_dir_given,
                                          bool threads_given)
{
    std::ifstream in(manifest_path);
    if (!in) throw ValidationError("cannot open manifest '" + manifest_path.string() + "'");
    json m;
    try {
        m = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("manifest '" + manifest_path.string() + "' is not valid JSON: " + e.what());
    }
    if (!m.contains("command") || !m.contains("config") || !m.contains("seed"))
        throw ValidationError("manifest lacks command, seed or config");
    const std::string command = m["command"].get<std::string>();
    if (command == "replay") throw ValidationError("cannot replay a replay");

    std::vector<std::string> args{kTool, "--seed", std::to_string(m["seed"].get<std::uint64_t>())};
    args.insert(args.end(), {"--out-dir", out_dir_given ? g.out_dir : manifest_path.parent_path().string()});
    if (g.quiet) args.push_back("--quiet");
    if (threads_given) args.insert(args.end(), {"--threads", std::to_string(g.threads)});
    args.push_back(command);
    for (const auto& [key, value] : m["config"].items()) {
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back("--" + key);
        } else if (value.is_string()) {
            if (!value.get<std::string>().empty()) args.insert(args.end(), {"--" + key, value.get<std::string>()});
        } else {
            args.insert(args.end(), {"--" + key, value.dump()});
        }
    }
    return args;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Stochastic income model: simulation, Fokker-Planck solutions, survey fits and poverty indices",
                 kTool};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    auto* out_opt = app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
    app.add_flag("--quiet", g.quiet, "Suppress progress messages");
    auto* threads_opt = app.add_option("--threads", g.threads, "Worker threads for simulate (0: OpenMP default)")
                            ->check(CLI::NonNegativeNumber);

    struct Entry {
        std::string name;
        std::unique_ptr<Command> command;
        std::unique_ptr<Config> config;
    };
    std::vector<Entry> entries;
    auto add = [&]<class T>(const std::string& name, const std::string& help, T* cmd) {
        CLI::App* sub = app.add_subcommand(name, help);
        auto cfg = std::make_unique<Config>(sub);
        cmd->add(*cfg);
        entries.push_back({name, std::unique_ptr<Command>(cmd), std::move(cfg)});
    };
    add("simulate", "Agent-based Langevin simulation with KS and Hill reports", new SimulateCmd);
    add("synth", "Generate synthetic banded survey rounds", new SynthCmd);
    add("fit", "Fit the steady-state law (and Monod curve) to rounds", new FitCmd);
    add("collapse", "Deflate and rescale rounds to a common mean", new CollapseCmd);
    add("indices", "Poverty index series: load, deflate, fit, Monod, indices", new IndicesCmd);
    add("evolve", "Fokker-Planck evolution towards the steady state", new EvolveCmd);
    add("modes", "Eigenmode parameters and curves", new ModesCmd);
    std::string manifest;
    CLI::App* replay = app.add_subcommand("replay", "Re-run a command from its manifest.json");
    replay->add_option("manifest", manifest, "Path to manifest.json")->required();

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : static_cast<int>(ErrorKind::usage);
    }

    try {
        if (replay->parsed())
            return run_cli(replay_arguments(manifest, g, out_opt->count() > 0, threads_opt->count() > 0), out, err);

        for (auto& e : entries) {
            if (!e.config->app()->parsed()) continue;
            json config = e.config->resolve();
            Output output(g.out_dir, out, g.quiet);
            e.command->run(g, output);
            json m{{"tool", kTool},
                   {"format", kManifestFormat},
                   {"command", e.name},
                   {"seed", g.seed},
                   {"config", config},
                   {"outputs", output.files()}};
            io::write_text(fs::path(g.out_dir) / "manifest.json", dump(m));
            return 0;
        }
        throw UsageError("no command given");
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorKind::validation);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace income
