#pragma once

// Numeric primitives shared by every other module: activations, small dense
// matrix algebra, order statistics, correlation and a portable PRNG.
//
// Everything is plain 64-bit floating point. The matrix type is row-major and
// sized for the tiny recurrent models trained here; nothing is vectorized.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace roadfc {

using Vec = std::vector<double>;

enum class Activation { Sigmoid, Tanh, Relu };

std::string_view to_string(Activation kind);
Activation activation_from_string(std::string_view name);

/// Applies `kind` to a finite scalar. Throws InvalidArgument on NaN/inf.
double activate(Activation kind, double x);

/// Derivative of the activation expressed through its output `y = act(x)`.
/// For relu the subgradient at zero is 0, so `y > 0` fully determines it.
double activation_grad_from_output(Activation kind, double y);

class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, Vec values);

  static Mat identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  std::string shape_string() const;

  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec values_;
};

/// result[i] = sum_j m(i, j) * v[j]
Vec mat_vec(const Mat& m, std::span<const double> v);

/// out[j] += sum_i m(i, j) * v[i]  (transpose product, accumulating)
void mat_t_vec_acc(const Mat& m, std::span<const double> v, std::span<double> out);

/// m(i, j) += a[i] * b[j]
void outer_acc(Mat& m, std::span<const double> a, std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);

/// Linear-interpolation quantile at rank q * (n - 1) of the sorted values.
double quantile(std::span<const double> values, double q);
double median(std::span<const double> values);

/// Pearson product-moment correlation. Throws InvalidArgument with
/// "degenerate correlation input" when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> values);

/// SplitMix64 generator. The output stream depends only on the seed, so
/// results are identical on every platform and compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double next_unit();

  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t below(std::uint64_t n);

  /// Independent generator keyed by a fixed label, leaves this one untouched.
  Rng child(std::string_view label) const;

  std::uint64_t seed_state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

/// Uniform draw from [lo, hi); returns lo when the interval is empty.
double uniform(Rng& rng, double lo, double hi);

/// In-place Fisher-Yates permutation driven by `rng`.
void shuffle_indices(Rng& rng, std::vector<std::size_t>& indices);

}  // namespace roadfc
