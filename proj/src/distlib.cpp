#include "income/distlib.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "income/error.hpp"
#include "income/rng.hpp"
#include "income/special.hpp"

namespace income {

SteadyStateIPDF::SteadyStateIPDF(double shape_M, double scale_C0, double offset_ymin)
    : shape_(shape_M), scale_(scale_C0), offset_(offset_ymin)
{
    if (!(shape_M > 0.0) || !std::isfinite(shape_M))
        throw ValidationError("SteadyStateIPDF: M must be positive, got " + std::to_string(shape_M));
    if (!(scale_C0 > 0.0) || !std::isfinite(scale_C0))
        throw ValidationError("SteadyStateIPDF: C0 must be positive, got " + std::to_string(scale_C0));
    if (!(offset_ymin >= 0.0) || !std::isfinite(offset_ymin))
        throw ValidationError("SteadyStateIPDF: offset must be >= 0, got " + std::to_string(offset_ymin));
    log_norm_ = (shape_ + 1.0) * std::log(scale_) - income::lgamma(shape_ + 1.0);
}

namespace {

void require_positive(double y, const char* what)
{
    if (!(y > 0.0)) throw DomainError(std::string(what) + ": income must be positive, got " + std::to_string(y));
}

}  // namespace

double ipdf_log_density(const SteadyStateIPDF& dist, double y)
{
    require_positive(y, "ipdf_log_density");
    if (std::isinf(y)) return -std::numeric_limits<double>::infinity();
    return dist.log_norm() - dist.scale() / y - (dist.shape() + 2.0) * std::log(y);
}

double ipdf_density(const SteadyStateIPDF& dist, double y)
{
    require_positive(y, "ipdf_density");
    return std::exp(ipdf_log_density(dist, y));
}

double ipdf_cdf(const SteadyStateIPDF& dist, double y)
{
    require_positive(y, "ipdf_cdf");
    return reg_upper_incomplete_gamma(dist.shape() + 1.0, dist.scale() / y);
}

double ipdf_survival(const SteadyStateIPDF& dist, double y)
{
    require_positive(y, "ipdf_survival");
    return reg_lower_incomplete_gamma(dist.shape() + 1.0, dist.scale() / y);
}

double ipdf_quantile(const SteadyStateIPDF& dist, double p)
{
    if (!(p > 0.0 && p < 1.0)) throw DomainError("ipdf_quantile: p must lie in (0, 1)");
    double lo = std::log(ipdf_mode(dist));
    double hi = lo;
    while (ipdf_cdf(dist, std::exp(lo)) > p) lo -= 1.0;
    while (ipdf_cdf(dist, std::exp(hi)) < p) hi += 1.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * (1.0 + std::fabs(hi)); ++i) {
        const double mid = 0.5 * (lo + hi);
        if (ipdf_cdf(dist, std::exp(mid)) < p)
            lo = mid;
        else
            hi = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

double ipdf_mode(const SteadyStateIPDF& dist) { return dist.scale() / (dist.shape() + 2.0); }

double ipdf_mean(const SteadyStateIPDF& dist) { return dist.scale() / dist.shape(); }

Moment ipdf_moment(const SteadyStateIPDF& dist, int k)
{
    if (k < 1) throw DomainError("ipdf_moment: order must be >= 1");
    const double m = dist.shape();
    if (static_cast<double>(k) >= m + 1.0) return {0.0, true};
    const double log_value = k * std::log(dist.scale()) + income::lgamma(m + 1.0 - k) - income::lgamma(m + 1.0);
    return {std::exp(log_value), false};
}

std::vector<double> ipdf_sample(const SteadyStateIPDF& dist, std::size_t n, std::uint64_t seed)
{
    constexpr std::size_t chunk = 4096;
    std::vector<double> out(n);
    const double shape = dist.shape() + 1.0;
    const double scale = dist.scale();
    const auto n_chunks = static_cast<std::int64_t>((n + chunk - 1) / chunk);
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < n_chunks; ++c) {
        CounterStream stream(seed, StreamDomain::sampling, static_cast<std::uint32_t>(c));
        const std::size_t begin = static_cast<std::size_t>(c) * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        for (std::size_t i = begin; i < end; ++i) out[i] = scale / stream.gamma(shape);
    }
    return out;
}

}  // namespace income
