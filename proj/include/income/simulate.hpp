#pragma once

// Agent-based Euler–Maruyama integration of
//
//     dy_i = (C(t) - M y_i) dt + sigma y_i dW_i        (Ito)
//
// Each agent owns a counter-based noise stream keyed by (seed, stream id), so
// trajectories do not depend on how agents are split across threads.  The
// OpenMP kernel in `advance` is checked bit-for-bit against the plain serial
// loop in `reference::advance`.

#include <cmath>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "income/distlib.hpp"
#include "income/piecewise.hpp"

namespace income {

struct LangevinParams {
    double M = 1.6;
    PiecewiseLinear labour_rate{1.6};  ///< C(t), must stay positive
    double sigma = std::sqrt(2.0);      ///< noise scale; sqrt(2) matches the FP diffusion y^2 f'
    double dt = 1e-3;
    double floor = 0.0;  ///< reflection floor; 0 selects 1e-9 * min C / M

    double reflection_floor() const;

    /// Throws ValidationError on M <= 0, sigma < 0, C <= 0, or when the
    /// stability guard dt (M+2) < 0.1, dt sigma^2 < 0.05 fails.
    void validate() const;
};

struct AgentPopulation {
    std::vector<double> incomes;                   ///< model income y > 0
    std::vector<std::uint32_t> stream_ids;         ///< noise stream of each agent
    std::vector<std::uint64_t> fallback_positions; ///< ziggurat slow-path stream offsets
    std::uint64_t seed = 0;
    double start_time = 0.0;
    std::uint64_t steps = 0; ///< steps taken since start_time

    double time(double dt) const { return start_time + static_cast<double>(steps) * dt; }
    std::size_t size() const noexcept { return incomes.size(); }
};

/// Equilibrium draw or a common constant starting income.
using InitialState = std::variant<SteadyStateIPDF, double>;

AgentPopulation make_population(std::size_t n_agents, const InitialState& init, std::uint64_t seed);

struct ParallelOptions {
    int workers = 0; ///< 0 uses the OpenMP default
};

/// Advance every agent by `n_steps` Euler–Maruyama steps in place.
void advance(AgentPopulation& pop, const LangevinParams& params, std::uint64_t n_steps,
             const ParallelOptions& parallel = {});

/// One step; returns the advanced population.
AgentPopulation step(AgentPopulation pop, const LangevinParams& params,
                     const ParallelOptions& parallel = {});

/// Simulate n_agents from `init` until t_end, returning a snapshot at each
/// requested time (rounded to the step grid) or only the final state when
/// `snapshot_times` is empty.
std::vector<AgentPopulation> run(std::size_t n_agents, const LangevinParams& params, double t_end,
                                 const InitialState& init, std::uint64_t seed,
                                 std::vector<double> snapshot_times = {},
                                 const ParallelOptions& parallel = {});

namespace reference {

// Straightforward serial implementations, kept for testing and benchmarking.
void advance(AgentPopulation& pop, const LangevinParams& params, std::uint64_t n_steps);
std::vector<AgentPopulation> run(std::size_t n_agents, const LangevinParams& params, double t_end,
                                 const InitialState& init, std::uint64_t seed,
                                 std::vector<double> snapshot_times = {});

}  // namespace reference

/// Hill estimate over the largest `tail_fraction` of the sample, reported as a
/// density exponent (Hill CDF-tail index + 1).  Needs at least 100 tail points.
double hill_tail_exponent(std::span<const double> incomes, double tail_fraction);

/// Kolmogorov–Smirnov sup distance between the sample's empirical CDF and dist.
double ks_distance(std::span<const double> sample, const SteadyStateIPDF& dist);

namespace detail {

inline double euler_maruyama(double y, double c_dt, double m_dt, double noise_scale, double xi,
                             double floor) noexcept
{
    double next = y + (c_dt - m_dt * y) + noise_scale * y * xi;
    next = next <= floor ? 2.0 * floor - next : next;
    return next <= floor ? floor : next;
}

}  // namespace detail

}  // namespace income
