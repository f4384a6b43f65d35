#pragma once

// Closed-form stationary income distribution of the multiplicative-noise
// Langevin model:
//
//     f(y) = C0^(M+1) / Γ(M+1) · exp(-C0 / y) · y^-(M+2),   y > 0
//
// i.e. C0 / y is Gamma(M+1, 1) distributed.  y is income above the
// starvation offset; the offset is carried along but never applied here.

#include <cstdint>
#include <vector>

namespace income {

class SteadyStateIPDF {
public:
    /// Throws ValidationError unless shape_M > 0, scale_C0 > 0, offset_ymin >= 0.
    SteadyStateIPDF(double shape_M, double scale_C0, double offset_ymin = 0.0);

    double shape() const noexcept { return shape_; }
    double scale() const noexcept { return scale_; }
    double offset() const noexcept { return offset_; }

    /// log of the normalization C0^(M+1) / Γ(M+1).
    double log_norm() const noexcept { return log_norm_; }

private:
    double shape_;
    double scale_;
    double offset_;
    double log_norm_;
};

double ipdf_log_density(const SteadyStateIPDF& dist, double y);
double ipdf_density(const SteadyStateIPDF& dist, double y);

/// P(Y <= y) = Q(M+1, C0/y).
double ipdf_cdf(const SteadyStateIPDF& dist, double y);
/// P(Y > y) = P(M+1, C0/y), accurate deep in the tail.
double ipdf_survival(const SteadyStateIPDF& dist, double y);
/// Inverse of ipdf_cdf for p in (0, 1), by bracketed bisection in log y.
double ipdf_quantile(const SteadyStateIPDF& dist, double p);

/// Mode of the density, C0 / (M+2).
double ipdf_mode(const SteadyStateIPDF& dist);
/// C0 / M.
double ipdf_mean(const SteadyStateIPDF& dist);

struct Moment {
    double value = 0.0;     ///< meaningful only when !divergent
    bool divergent = false; ///< k >= M + 1
};

/// k-th raw moment C0^k Γ(M+1-k) / Γ(M+1), flagged divergent when k >= M + 1.
Moment ipdf_moment(const SteadyStateIPDF& dist, int k);

/// n i.i.d. draws C0 / G with G ~ Gamma(M+1).  Deterministic in `seed` and
/// independent of the number of OpenMP threads.
std::vector<double> ipdf_sample(const SteadyStateIPDF& dist, std::size_t n, std::uint64_t seed);

}  // namespace income
