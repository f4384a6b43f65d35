#include "income/special.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "income/error.hpp"

namespace income {

namespace {

constexpr double kTolerance = 1e-12;
constexpr int kMaxIterations = 500;

void check_args(double a, double x)
{
    if (!(a > 0.0) || !std::isfinite(a))
        throw DomainError("incomplete gamma: shape must be positive and finite, got " + std::to_string(a));
    if (!(x >= 0.0)) throw DomainError("incomplete gamma: x must be >= 0, got " + std::to_string(x));
}

// exp(-x) x^a / Γ(a)
double prefactor(double a, double x) { return std::exp(-x + a * std::log(x) - income::lgamma(a)); }

// P(a, x) by series; valid for x < a + 1.
double lower_series(double a, double x)
{
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n <= kMaxIterations; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * kTolerance) return sum * prefactor(a, x);
    }
    throw NumericalError("incomplete gamma series failed to converge (a=" + std::to_string(a) +
                         ", x=" + std::to_string(x) + ")");
}

// Q(a, x) by continued fraction; valid for x >= a + 1.
double upper_fraction(double a, double x)
{
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIterations; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kTolerance) return h * prefactor(a, x);
    }
    throw NumericalError("incomplete gamma continued fraction failed to converge (a=" +
                         std::to_string(a) + ", x=" + std::to_string(x) + ")");
}

}  // namespace

double lgamma(double x)
{
    if (!(x > 0.0)) throw DomainError("lgamma: argument must be positive, got " + std::to_string(x));
    return std::lgamma(x);
}

double reg_upper_incomplete_gamma(double a, double x)
{
    check_args(a, x);
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) return 1.0 - lower_series(a, x);
    return upper_fraction(a, x);
}

double reg_lower_incomplete_gamma(double a, double x)
{
    check_args(a, x);
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < a + 1.0) return lower_series(a, x);
    return 1.0 - upper_fraction(a, x);
}

}  // namespace income
