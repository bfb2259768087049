#include "baselines.hpp"

#include <cmath>

#include "error.hpp"

namespace roadfc {

OlsFit fit_ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("fit_ols length mismatch");
  if (x.size() < 2) throw InvalidArgument("fit_ols needs at least two points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  if (sxx == 0.0) throw InvalidArgument("degenerate regressor");
  OlsFit fit;
  fit.beta1 = sxy / sxx;
  fit.beta0 = my - fit.beta1 * mx;
  fit.residuals.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) fit.residuals[k] = y[k] - fit.predict(x[k]);
  return fit;
}

Vec difference(std::span<const double> series, std::size_t d) {
  Vec out(series.begin(), series.end());
  for (std::size_t pass = 0; pass < d; ++pass) {
    if (out.empty()) break;
    for (std::size_t k = 0; k + 1 < out.size(); ++k) out[k] = out[k + 1] - out[k];
    out.pop_back();
  }
  return out;
}

namespace {

// Gaussian elimination with partial pivoting on a small dense system.
Vec solve(Mat a, Vec b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    }
    if (!(std::abs(a(pivot, col)) > 1e-300)) throw InvalidArgument("singular AR design");
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(pivot, c));
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = a(r, col) / a(col, col);
      for (std::size_t c = col; c < n; ++c) a(r, c) -= factor * a(col, c);
      b[r] -= factor * b[col];
    }
  }
  Vec x(n);
  for (std::size_t r = n; r-- > 0;) {
    double acc = b[r];
    for (std::size_t c = r + 1; c < n; ++c) acc -= a(r, c) * x[c];
    x[r] = acc / a(r, r);
  }
  return x;
}

constexpr double kRidge = 1e-10;

}  // namespace

ArFit fit_ar(std::span<const double> series, std::size_t p, std::size_t d, bool center) {
  if (p < 1) throw InvalidArgument("AR order must be >= 1");
  if (series.size() <= p + d + 1) {
    throw InvalidArgument("AR(" + std::to_string(p) + "," + std::to_string(d) + ") needs more than " +
                          std::to_string(p + d + 1) + " points, got " +
                          std::to_string(series.size()));
  }
  Vec z = difference(series, d);
  ArFit fit;
  fit.order = p;
  fit.differencing = d;
  fit.centered = center;
  if (center) {
    fit.mean = mean(z);
    for (double& v : z) v -= fit.mean;
  }

  Mat xtx(p, p);
  Vec xty(p, 0.0);
  for (std::size_t t = p; t < z.size(); ++t) {
    for (std::size_t i = 0; i < p; ++i) {
      xty[i] += z[t - 1 - i] * z[t];
      for (std::size_t j = 0; j < p; ++j) xtx(i, j) += z[t - 1 - i] * z[t - 1 - j];
    }
  }
  double diag_max = 0.0;
  for (std::size_t i = 0; i < p; ++i) diag_max = std::max(diag_max, xtx(i, i));
  if (diag_max == 0.0) throw InvalidArgument("degenerate regressor");
  for (std::size_t i = 0; i < p; ++i) xtx(i, i) += kRidge;

  fit.alpha = solve(std::move(xtx), std::move(xty));
  for (std::size_t t = p; t < z.size(); ++t) {
    double pred = 0.0;
    for (std::size_t i = 0; i < p; ++i) pred += fit.alpha[i] * z[t - 1 - i];
    fit.residuals.push_back(z[t] - pred);
  }
  return fit;
}

Vec forecast_ar(const ArFit& fit, std::span<const double> history, std::size_t steps) {
  const std::size_t p = fit.order;
  const std::size_t d = fit.differencing;
  if (fit.alpha.size() != p) throw InvalidArgument("AR fit has inconsistent order");
  if (history.size() < p + d) {
    throw InvalidArgument("forecast_ar needs at least " + std::to_string(p + d) +
                          " history values, got " + std::to_string(history.size()));
  }
  // Last value at every differencing level, for integration back to levels.
  std::vector<Vec> levels;
  levels.emplace_back(history.begin(), history.end());
  for (std::size_t k = 0; k < d; ++k) levels.push_back(difference(levels.back(), 1));

  Vec z = levels.back();
  for (double& v : z) v -= fit.mean;
  Vec out;
  out.reserve(steps);
  Vec last(d + 1);
  for (std::size_t k = 0; k <= d; ++k) last[k] = levels[k].back();
  for (std::size_t s = 0; s < steps; ++s) {
    double next = 0.0;
    for (std::size_t i = 0; i < p; ++i) next += fit.alpha[i] * z[z.size() - 1 - i];
    z.push_back(next);
    // Integrate: level k value = previous level-k value + new level-(k+1) value.
    last[d] = next + fit.mean;
    for (std::size_t k = d; k-- > 0;) last[k] = last[k] + last[k + 1];
    out.push_back(last[0]);
  }
  return out;
}

PoissonFit poisson_fit(std::span<const double> counts) {
  if (counts.empty()) throw InvalidArgument("poisson_fit of empty input");
  for (double c : counts) {
    if (!(c >= 0.0)) throw InvalidArgument("negative count in poisson_fit");
  }
  return PoissonFit{mean(counts)};
}

double poisson_pmf(double lambda, std::size_t k) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InvalidArgument("poisson rate must be finite and >= 0");
  }
  if (lambda == 0.0) return k == 0 ? 1.0 : 0.0;
  const double kd = static_cast<double>(k);
  return std::exp(kd * std::log(lambda) - lambda - std::lgamma(kd + 1.0));
}

}  // namespace roadfc
