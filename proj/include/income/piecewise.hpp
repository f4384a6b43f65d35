#pragma once

#include <vector>

namespace income {

/// Piecewise-linear function of time through (t_i, v_i) knots, held constant
/// outside the knot range.  A single knot gives a constant function.
class PiecewiseLinear {
public:
    PiecewiseLinear() = default;
    explicit PiecewiseLinear(double constant);
    /// Knot times must be strictly increasing; throws ValidationError otherwise.
    PiecewiseLinear(std::vector<double> times, std::vector<double> values);

    double operator()(double t) const;

    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<double>& values() const noexcept { return values_; }
    bool is_constant() const noexcept;
    double min_value() const;

private:
    std::vector<double> times_;
    std::vector<double> values_;
};

}  // namespace income
