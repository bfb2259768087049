#include "numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "error.hpp"

namespace roadfc {

std::string_view to_string(Activation kind) {
  switch (kind) {
    case Activation::Sigmoid:
      return "sigmoid";
    case Activation::Tanh:
      return "tanh";
    case Activation::Relu:
      return "relu";
  }
  return "unknown";
}

Activation activation_from_string(std::string_view name) {
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw InvalidArgument("unknown activation '" + std::string(name) + "'");
}

double activate(Activation kind, double x) {
  if (!std::isfinite(x)) throw InvalidArgument("non-finite activation input");
  switch (kind) {
    case Activation::Sigmoid:
      // Branch on sign so exp never overflows.
      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
      else {
        const double e = std::exp(x);
        return e / (1.0 + e);
      }
    case Activation::Tanh:
      return std::tanh(x);
    case Activation::Relu:
      return x > 0.0 ? x : 0.0;
  }
  return x;
}

double activation_grad_from_output(Activation kind, double y) {
  switch (kind) {
    case Activation::Sigmoid:
      return y * (1.0 - y);
    case Activation::Tanh:
      return 1.0 - y * y;
    case Activation::Relu:
      return y > 0.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

Mat::Mat(std::size_t rows, std::size_t cols, Vec values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw InvalidArgument("matrix data length " + std::to_string(values_.size()) +
                          " does not match shape " + shape_string());
  }
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Mat::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Vec mat_vec(const Mat& m, std::span<const double> v) {
  if (v.size() != m.cols()) {
    throw InvalidArgument("mat_vec shape mismatch: matrix " + m.shape_string() +
                          ", vector " + std::to_string(v.size()));
  }
  Vec out(m.rows(), 0.0);
  const auto data = m.values();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* row = data.data() + i * m.cols();
    double acc = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) acc += row[j] * v[j];
    out[i] = acc;
  }
  return out;
}

void mat_t_vec_acc(const Mat& m, std::span<const double> v, std::span<double> out) {
  if (v.size() != m.rows() || out.size() != m.cols()) {
    throw InvalidArgument("mat_t_vec shape mismatch: matrix " + m.shape_string() +
                          ", vector " + std::to_string(v.size()) + ", output " +
                          std::to_string(out.size()));
  }
  const auto data = m.values();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* row = data.data() + i * m.cols();
    const double vi = v[i];
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += row[j] * vi;
  }
}

void outer_acc(Mat& m, std::span<const double> a, std::span<const double> b) {
  if (a.size() != m.rows() || b.size() != m.cols()) {
    throw InvalidArgument("outer product shape mismatch: matrix " + m.shape_string());
  }
  auto data = m.values();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double* row = data.data() + i * m.cols();
    const double ai = a[i];
    for (std::size_t j = 0; j < m.cols(); ++j) row[j] += ai * b[j];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("dot length mismatch: " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile of empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile fraction outside [0,1]");
  Vec sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

double mean(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("mean of empty input");
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw InvalidArgument("pearson length mismatch: " + std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()));
  }
  if (x.size() < 2) throw InvalidArgument("pearson needs at least two points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw InvalidArgument("degenerate correlation input");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return mix64(state_);
}

double Rng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("Rng::below requires n > 0");
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

Rng Rng::child(std::string_view label) const {
  // FNV-1a over the label, folded into the parent state.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return Rng(mix64(state_ ^ mix64(h)));
}

double uniform(Rng& rng, double lo, double hi) {
  if (lo > hi) throw InvalidArgument("uniform: lo > hi");
  if (lo == hi) return lo;
  const double r = lo + (hi - lo) * rng.next_unit();
  // Rounding can land exactly on hi for tiny intervals.
  return r < hi ? r : lo;
}

void shuffle_indices(Rng& rng, std::vector<std::size_t>& indices) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(indices[i - 1], indices[j]);
  }
}

}  // namespace roadfc
