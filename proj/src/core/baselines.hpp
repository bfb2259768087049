#pragma once

// Classical comparison models: simple linear regression, autoregression on a
// d-times differenced series, and a Poisson count model.

#include <cstddef>
#include <span>

#include "numkernel.hpp"

namespace roadfc {

struct OlsFit {
  double beta0 = 0.0;  // intercept
  double beta1 = 0.0;  // slope
  Vec residuals;

  double predict(double x) const { return beta0 + beta1 * x; }
};

/// Closed-form least squares y = beta0 + beta1 x. Throws InvalidArgument
/// "degenerate regressor" when x has zero variance.
OlsFit fit_ols(std::span<const double> x, std::span<const double> y);

struct ArFit {
  std::size_t order = 1;        // p
  std::size_t differencing = 0; // d
  Vec alpha;                    // alpha[0] multiplies X_{t-1}
  double mean = 0.0;            // subtracted before fitting when centered
  bool centered = false;
  Vec residuals;
};

/// d-fold first difference.
Vec difference(std::span<const double> series, std::size_t d);

/// Least-squares AR(p) on the d-times differenced series, no intercept
/// (optionally mean-centered), solved from the normal equations with a 1e-10
/// ridge.
ArFit fit_ar(std::span<const double> series, std::size_t p, std::size_t d, bool center = false);

/// Rolls the fitted recursion forward `steps` values past the end of
/// `history` and integrates back to levels.
Vec forecast_ar(const ArFit& fit, std::span<const double> history, std::size_t steps);

struct PoissonFit {
  double lambda = 0.0;
};

/// Maximum-likelihood rate, the sample mean. Negative counts are rejected.
PoissonFit poisson_fit(std::span<const double> counts);

/// P(X = k) evaluated in log space; pmf(0 | lambda = 0) = 1.
double poisson_pmf(double lambda, std::size_t k);

}  // namespace roadfc
