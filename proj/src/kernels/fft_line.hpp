#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace wfmini::kernels::detail {

// Iterative radix-2 Cooley-Tukey on one contiguous line.
inline void fft_line(std::span<std::complex<double>> x) {
  const std::size_t n = x.size();
  if (n < 2) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // direct twiddles; recurrence-generated ones drift past 1e-12
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      const std::complex<double> w(std::cos(angle), std::sin(angle));
      for (std::size_t start = 0; start < n; start += len) {
        const auto u = x[start + k];
        const auto v = x[start + k + half] * w;
        x[start + k] = u + v;
        x[start + k + half] = u - v;
      }
    }
  }
}

// Strided view of one line along `axis` of a row-major array.
struct AxisLines {
  std::size_t length;   // points per line
  std::size_t stride;   // distance between consecutive points
  std::size_t count;    // number of lines
  std::size_t inner;    // product of trailing extents (== stride)

  std::size_t line_start(std::size_t line) const noexcept {
    const std::size_t outer = line / inner;
    const std::size_t in = line % inner;
    return outer * length * inner + in;
  }
};

inline AxisLines axis_lines(const std::vector<std::size_t>& shape, std::size_t axis) {
  std::size_t inner = 1;
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  std::size_t total = 1;
  for (auto s : shape) total *= s;
  return AxisLines{shape[axis], inner, total / shape[axis], inner};
}

inline void transform_line(std::span<std::complex<double>> data, const AxisLines& lines,
                           std::size_t line, std::vector<std::complex<double>>& scratch) {
  const std::size_t base = lines.line_start(line);
  scratch.resize(lines.length);
  for (std::size_t i = 0; i < lines.length; ++i) scratch[i] = data[base + i * lines.stride];
  fft_line(scratch);
  for (std::size_t i = 0; i < lines.length; ++i) data[base + i * lines.stride] = scratch[i];
}

}  // namespace wfmini::kernels::detail
