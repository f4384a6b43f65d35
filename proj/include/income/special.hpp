#pragma once

namespace income {

/// log Γ(x) for x > 0.
double lgamma(double x);

/// Regularized upper incomplete gamma Q(a, x) = Γ(a, x) / Γ(a), a > 0, x ≥ 0.
///
/// Uses the power series for P when x < a + 1 and a modified-Lentz continued
/// fraction for Q otherwise; both stop at a relative increment of 1e-12 and
/// raise NumericalError after 500 iterations.
double reg_upper_incomplete_gamma(double a, double x);

/// Regularized lower incomplete gamma P(a, x) = 1 - Q(a, x), computed
/// directly on whichever side keeps it accurate.
double reg_lower_incomplete_gamma(double a, double x);

}  // namespace income
