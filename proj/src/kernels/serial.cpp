// Straight-line reference versions of the compute kernels.

#include <algorithm>
#include <cmath>
#include <random>

#include "fft_line.hpp"
#include "wfmini/kernels/dense.hpp"
#include "wfmini/seed.hpp"

namespace wfmini::kernels::serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  }
}

void fft(std::span<std::complex<double>> data, int transform_dim) {
  const auto shape = fft_shape(data.size(), transform_dim);
  std::vector<std::complex<double>> scratch;
  for (std::size_t axis = 0; axis < shape.size(); ++axis) {
    const auto lines = detail::axis_lines(shape, axis);
    for (std::size_t line = 0; line < lines.count; ++line) detail::transform_line(data, lines, line, scratch);
  }
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  const std::size_t n = std::min(x.size(), y.size());
  for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + y[i];
}

void scatter_add(std::span<const double> x, std::span<const std::size_t> idx, std::span<double> y) {
  const std::size_t n = std::min(x.size(), idx.size());
  for (std::size_t i = 0; i < n; ++i) y[idx[i]] += x[i];
}

double reduce_sum(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

void inplace(Functor f, std::span<double> y) {
  for (double& v : y) {
    switch (f) {
      case Functor::square: v = v * v; break;
      case Functor::sqrt: v = std::sqrt(v); break;
      case Functor::negate: v = -v; break;
    }
  }
}

void fill_uniform(std::span<double> out, std::uint64_t seed) {
  for (std::size_t lo = 0, b = 0; lo < out.size(); lo += kFillBlock, ++b) {
    std::mt19937_64 gen(block_seed(seed, b));
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    const std::size_t hi = std::min(out.size(), lo + kFillBlock);
    for (std::size_t i = lo; i < hi; ++i) out[i] = dist(gen);
  }
}

void fill_normal(std::span<double> out, std::uint64_t seed) {
  for (std::size_t lo = 0, b = 0; lo < out.size(); lo += kFillBlock, ++b) {
    std::mt19937_64 gen(block_seed(seed, b));
    std::normal_distribution<double> dist(0.0, 1.0);
    const std::size_t hi = std::min(out.size(), lo + kFillBlock);
    for (std::size_t i = lo; i < hi; ++i) out[i] = dist(gen);
  }
}

}  // namespace wfmini::kernels::serial
