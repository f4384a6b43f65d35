#include "income/simulate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "income/error.hpp"
#include "income/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace income {

double LangevinParams::reflection_floor() const
{
    if (floor > 0.0) return floor;
    return 1e-9 * labour_rate.min_value() / M;
}

void LangevinParams::validate() const
{
    if (!(M > 0.0) || !std::isfinite(M)) throw ValidationError("Langevin: M must be positive");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("Langevin: sigma must be >= 0");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("Langevin: dt must be positive");
    if (!(labour_rate.min_value() > 0.0)) throw ValidationError("Langevin: C(t) must stay positive");
    if (!(floor >= 0.0)) throw ValidationError("Langevin: floor must be >= 0");
    if (!(dt * (M + 2.0) < 0.1))
        throw ValidationError("Langevin: stability guard dt*(M+2) < 0.1 violated (dt=" + std::to_string(dt) +
                              ", M=" + std::to_string(M) + ")");
    if (!(dt * sigma * sigma < 0.05))
        throw ValidationError("Langevin: stability guard dt*sigma^2 < 0.05 violated");
}

AgentPopulation make_population(std::size_t n_agents, const InitialState& init, std::uint64_t seed)
{
    if (n_agents == 0) throw ValidationError("population needs at least one agent");
    if (n_agents > std::numeric_limits<std::uint32_t>::max())
        throw ValidationError("population too large for 32-bit stream ids");
    AgentPopulation pop;
    pop.seed = seed;
    pop.incomes.resize(n_agents);
    pop.stream_ids.resize(n_agents);
    pop.fallback_positions.assign(n_agents, 0);
    for (std::size_t i = 0; i < n_agents; ++i) pop.stream_ids[i] = static_cast<std::uint32_t>(i);

    if (const auto* dist = std::get_if<SteadyStateIPDF>(&init)) {
        const double shape = dist->shape() + 1.0;
        const auto n = static_cast<std::int64_t>(n_agents);
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            CounterStream stream(seed, StreamDomain::initial_state, static_cast<std::uint32_t>(i));
            pop.incomes[static_cast<std::size_t>(i)] = dist->scale() / stream.gamma(shape);
        }
    } else {
        const double y0 = std::get<double>(init);
        if (!(y0 > 0.0) || !std::isfinite(y0)) throw ValidationError("initial income must be positive");
        std::fill(pop.incomes.begin(), pop.incomes.end(), y0);
    }
    return pop;
}

namespace {

struct StepCoefficients {
    std::vector<double> c_dt; // C(t_k) dt for each step of the call
    double m_dt;
    double noise_scale;
    double floor;
};

StepCoefficients coefficients(const AgentPopulation& pop, const LangevinParams& params, std::uint64_t n_steps)
{
    StepCoefficients k;
    k.c_dt.resize(n_steps);
    for (std::uint64_t j = 0; j < n_steps; ++j) {
        const double t = pop.start_time + static_cast<double>(pop.steps + j) * params.dt;
        k.c_dt[j] = params.labour_rate(t) * params.dt;
    }
    k.m_dt = params.M * params.dt;
    k.noise_scale = params.sigma * std::sqrt(params.dt);
    k.floor = params.reflection_floor();
    return k;
}

void check_finite(const AgentPopulation& pop)
{
    for (std::size_t i = 0; i < pop.incomes.size(); ++i) {
        if (!std::isfinite(pop.incomes[i]))
            throw NumericalError("agent " + std::to_string(i) + " income became non-finite by step " +
                                 std::to_string(pop.steps));
    }
}

// Word k of an agent's primary stream is lane k % 4 of Philox block k / 4.
Philox4x32::Block noise_block(const Philox4x32& cipher, std::uint64_t block, std::uint32_t stream)
{
    return cipher({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), stream,
                   static_cast<std::uint32_t>(StreamDomain::dynamics)});
}

double slow_normal(unsigned layer, double u, const AgentPopulation& pop, std::size_t agent,
                   std::uint64_t& fallback_position)
{
    CounterStream fallback(pop.seed, StreamDomain::dynamics_fallback, pop.stream_ids[agent], fallback_position);
    const double xi = detail::ziggurat_slow(layer, u, fallback);
    fallback_position = fallback.position();
    return xi;
}

constexpr std::size_t kTile = 64;

int omp_default_threads()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace

void advance(AgentPopulation& pop, const LangevinParams& params, std::uint64_t n_steps,
             const ParallelOptions& parallel)
{
    params.validate();
    if (n_steps == 0) return;
    const StepCoefficients k = coefficients(pop, params, n_steps);
    const Philox4x32 cipher(pop.seed);
    const std::size_t n = pop.size();
    const auto n_tiles = static_cast<std::int64_t>((n + kTile - 1) / kTile);
    const std::uint64_t first = pop.steps;
    const int workers = parallel.workers;
    const auto& zig = detail::ziggurat();

#pragma omp parallel for schedule(static) num_threads(workers > 0 ? workers : omp_default_threads())
    for (std::int64_t tile = 0; tile < n_tiles; ++tile) {
        const std::size_t begin = static_cast<std::size_t>(tile) * kTile;
        const std::size_t width = std::min(kTile, n - begin);
        std::array<double, kTile> y{};
        std::array<std::uint64_t, kTile> fallback{};
        // Noise words of the current block, one array per lane.
        alignas(64) std::array<std::array<std::uint32_t, kTile>, 4> words{};
        for (std::size_t g = 0; g < width; ++g) {
            y[g] = pop.incomes[begin + g];
            fallback[g] = pop.fallback_positions[begin + g];
        }
        for (std::uint64_t j = 0; j < n_steps; ++j) {
            const std::uint64_t step_index = first + j;
            const unsigned lane = static_cast<unsigned>(step_index % 4);
            if (lane == 0 || j == 0) {
                const std::uint64_t block = step_index / 4;
                for (std::size_t g = 0; g < kTile; ++g) {
                    words[0][g] = static_cast<std::uint32_t>(block);
                    words[1][g] = static_cast<std::uint32_t>(block >> 32);
                    words[2][g] = g < width ? pop.stream_ids[begin + g] : 0u;
                    words[3][g] = static_cast<std::uint32_t>(StreamDomain::dynamics);
                }
                cipher.apply_batch(words[0].data(), words[1].data(), words[2].data(), words[3].data(), kTile);
            }
            const double c_dt = k.c_dt[j];
            const auto& lane_words = words[lane];
            // Fast ziggurat path for the whole tile without branches, then the
            // rare wedge/tail draws, then the update.
            std::array<double, kTile> xi, u;
            std::array<bool, kTile> ok;
            for (std::size_t g = 0; g < kTile; ++g) {
                const std::uint32_t bits = lane_words[g];
                const unsigned layer = bits & detail::ZigguratTables::kMask;
                u[g] = static_cast<double>(bits >> 8) * 0x1.0p-23 - 1.0;
                ok[g] = std::fabs(u[g]) < zig.ratio[layer];
                xi[g] = u[g] * zig.x[layer];
            }
            for (std::size_t g = 0; g < width; ++g)
                if (!ok[g]) xi[g] = slow_normal(lane_words[g] & detail::ZigguratTables::kMask, u[g], pop, begin + g, fallback[g]);
            for (std::size_t g = 0; g < kTile; ++g)
                y[g] = detail::euler_maruyama(y[g], c_dt, k.m_dt, k.noise_scale, xi[g], k.floor);
        }
        for (std::size_t g = 0; g < width; ++g) {
            pop.incomes[begin + g] = y[g];
            pop.fallback_positions[begin + g] = fallback[g];
        }
    }
    pop.steps += n_steps;
    check_finite(pop);
}

AgentPopulation step(AgentPopulation pop, const LangevinParams& params, const ParallelOptions& parallel)
{
    advance(pop, params, 1, parallel);
    return pop;
}

namespace {

std::vector<std::uint64_t> snapshot_steps(std::vector<double> times, double t_end, double dt)
{
    if (!(t_end > 0.0)) throw ValidationError("t_end must be positive");
    const auto total = static_cast<std::uint64_t>(std::llround(t_end / dt));
    if (total == 0) throw ValidationError("t_end shorter than one time step");
    std::vector<std::uint64_t> steps;
    if (times.empty()) return {total};
    if (!std::is_sorted(times.begin(), times.end()))
        throw ValidationError("snapshot times must be sorted");
    for (double t : times) {
        if (t < 0.0 || t > t_end * (1.0 + 1e-12))
            throw ValidationError("snapshot time " + std::to_string(t) + " outside [0, t_end]");
        steps.push_back(std::min(total, static_cast<std::uint64_t>(std::llround(t / dt))));
    }
    return steps;
}

template <class Advance>
std::vector<AgentPopulation> run_with(Advance&& adv, std::size_t n_agents, const LangevinParams& params,
                                      double t_end, const InitialState& init, std::uint64_t seed,
                                      std::vector<double> snapshot_times)
{
    params.validate();
    const auto targets = snapshot_steps(std::move(snapshot_times), t_end, params.dt);
    AgentPopulation pop = make_population(n_agents, init, seed);
    pop.start_time = 0.0;
    std::vector<AgentPopulation> out;
    out.reserve(targets.size());
    for (std::uint64_t target : targets) {
        if (target > pop.steps) adv(pop, target - pop.steps);
        out.push_back(pop);
    }
    return out;
}

}  // namespace

std::vector<AgentPopulation> run(std::size_t n_agents, const LangevinParams& params, double t_end,
                                 const InitialState& init, std::uint64_t seed,
                                 std::vector<double> snapshot_times, const ParallelOptions& parallel)
{
    return run_with([&](AgentPopulation& pop, std::uint64_t n) { advance(pop, params, n, parallel); },
                    n_agents, params, t_end, init, seed, std::move(snapshot_times));
}

namespace reference {

void advance(AgentPopulation& pop, const LangevinParams& params, std::uint64_t n_steps)
{
    params.validate();
    const Philox4x32 cipher(pop.seed);
    const double m_dt = params.M * params.dt;
    const double noise_scale = params.sigma * std::sqrt(params.dt);
    const double floor = params.reflection_floor();
    for (std::size_t i = 0; i < pop.size(); ++i) {
        for (std::uint64_t j = 0; j < n_steps; ++j) {
            const std::uint64_t k = pop.steps + j;
            const double t = pop.start_time + static_cast<double>(k) * params.dt;
            const std::uint32_t word = noise_block(cipher, k / 4, pop.stream_ids[i])[k % 4];
            unsigned layer;
            double u, xi;
            if (!detail::ziggurat_try(word, layer, u, xi))
                xi = slow_normal(layer, u, pop, i, pop.fallback_positions[i]);
            pop.incomes[i] = detail::euler_maruyama(pop.incomes[i], params.labour_rate(t) * params.dt, m_dt,
                                                    noise_scale, xi, floor);
        }
    }
    pop.steps += n_steps;
    check_finite(pop);
}

std::vector<AgentPopulation> run(std::size_t n_agents, const LangevinParams& params, double t_end,
                                 const InitialState& init, std::uint64_t seed,
                                 std::vector<double> snapshot_times)
{
    return run_with([&](AgentPopulation& pop, std::uint64_t n) { reference::advance(pop, params, n); },
                    n_agents, params, t_end, init, seed, std::move(snapshot_times));
}

}  // namespace reference

double hill_tail_exponent(std::span<const double> incomes, double tail_fraction)
{
    if (!(tail_fraction > 0.0 && tail_fraction < 1.0))
        throw ValidationError("hill: tail fraction must lie in (0, 1)");
    const auto k = static_cast<std::size_t>(std::floor(tail_fraction * static_cast<double>(incomes.size())));
    if (k < 100 || k >= incomes.size())
        throw ValidationError("hill: need at least 100 tail samples, have " + std::to_string(k));
    std::vector<double> sorted(incomes.begin(), incomes.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end(),
                     std::greater<>());
    const double threshold = sorted[k];
    if (!(threshold > 0.0)) throw ValidationError("hill: tail threshold must be positive");
    const double log_threshold = std::log(threshold);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += std::log(sorted[i]) - log_threshold;
    const double hill = sum / static_cast<double>(k);
    if (!(hill > 0.0)) throw NumericalError("hill: degenerate tail (all tail values equal)");
    return 1.0 + 1.0 / hill;
}

double ks_distance(std::span<const double> sample, const SteadyStateIPDF& dist)
{
    if (sample.empty()) throw ValidationError("ks_distance: empty sample");
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = ipdf_cdf(dist, sorted[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

}  // namespace income
