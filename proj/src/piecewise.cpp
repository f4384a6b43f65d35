#include "income/piecewise.hpp"

#include <algorithm>
#include <cmath>

#include "income/error.hpp"

namespace income {

PiecewiseLinear::PiecewiseLinear(double constant) : times_{0.0}, values_{constant} {}

PiecewiseLinear::PiecewiseLinear(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values))
{
    if (times_.empty() || times_.size() != values_.size())
        throw ValidationError("PiecewiseLinear: need matching, non-empty knot arrays");
    for (std::size_t i = 1; i < times_.size(); ++i)
        if (!(times_[i] > times_[i - 1]))
            throw ValidationError("PiecewiseLinear: knot times must be strictly increasing");
    for (double v : values_)
        if (!std::isfinite(v)) throw ValidationError("PiecewiseLinear: non-finite knot value");
}

double PiecewiseLinear::operator()(double t) const
{
    if (times_.empty()) throw ValidationError("PiecewiseLinear: evaluated before initialization");
    if (t <= times_.front()) return values_.front();
    if (t >= times_.back()) return values_.back();
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const auto i = static_cast<std::size_t>(it - times_.begin());
    const double w = (t - times_[i - 1]) / (times_[i] - times_[i - 1]);
    return values_[i - 1] + w * (values_[i] - values_[i - 1]);
}

bool PiecewiseLinear::is_constant() const noexcept
{
    return std::all_of(values_.begin(), values_.end(), [&](double v) { return v == values_.front(); });
}

double PiecewiseLinear::min_value() const
{
    if (values_.empty()) throw ValidationError("PiecewiseLinear: empty");
    return *std::min_element(values_.begin(), values_.end());
}

}  // namespace income
