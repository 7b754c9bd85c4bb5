#include "wfmini/kernels/dense.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fft_line.hpp"
#include "wfmini/error.hpp"
#include "wfmini/seed.hpp"

namespace wfmini::kernels {

namespace {

int clamp_threads(int threads) { return std::max(1, threads); }

std::size_t block_count(std::size_t n, std::size_t block) { return (n + block - 1) / block; }

template <typename Fill>
void fill_blocks(std::size_t n, std::uint64_t seed, int threads, Fill fill) {
  const auto blocks = static_cast<std::int64_t>(block_count(n, kFillBlock));
#pragma omp parallel for schedule(static) num_threads(clamp_threads(threads))
  for (std::int64_t b = 0; b < blocks; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kFillBlock;
    const std::size_t hi = std::min(n, lo + kFillBlock);
    std::mt19937_64 gen(block_seed(seed, static_cast<std::uint64_t>(b)));
    fill(gen, lo, hi);
  }
}

}  // namespace

Functor parse_functor(std::string_view name) {
  if (name == "square") return Functor::square;
  if (name == "sqrt") return Functor::sqrt;
  if (name == "negate") return Functor::negate;
  throw Error(ErrorCode::InvalidParameter, "unknown functor '" + std::string(name) + "'");
}

std::string_view to_string(Functor f) noexcept {
  switch (f) {
    case Functor::square: return "square";
    case Functor::sqrt: return "sqrt";
    case Functor::negate: return "negate";
  }
  return "?";
}

std::vector<std::size_t> fft_shape(std::size_t n, int dims) {
  if (!is_power_of_two(n)) throw Error(ErrorCode::InvalidParameter, "fft size must be a power of two");
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  const std::size_t axes = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(dims, 1)), 1,
                                                   std::max<std::size_t>(bits, 1));
  std::vector<std::size_t> shape(axes, 1);
  for (std::size_t b = 0; b < bits; ++b) shape[b % axes] <<= 1;
  return shape;
}

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n, int threads) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) num_threads(clamp_threads(threads))
  for (std::int64_t i = 0; i < rows; ++i) {
    double* crow = c.data() + static_cast<std::size_t>(i) * n;
    std::fill(crow, crow + n, 0.0);
    const double* arow = a.data() + static_cast<std::size_t>(i) * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aval = arow[p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
    }
  }
}

void fft(std::span<std::complex<double>> data, int transform_dim, int threads) {
  const auto shape = fft_shape(data.size(), transform_dim);
  for (std::size_t axis = 0; axis < shape.size(); ++axis) {
    const auto lines = detail::axis_lines(shape, axis);
    const auto count = static_cast<std::int64_t>(lines.count);
#pragma omp parallel num_threads(clamp_threads(threads))
    {
      std::vector<std::complex<double>> scratch;
#pragma omp for schedule(static)
      for (std::int64_t line = 0; line < count; ++line)
        detail::transform_line(data, lines, static_cast<std::size_t>(line), scratch);
    }
  }
}

void axpy(double a, std::span<const double> x, std::span<double> y, int threads) {
  const auto n = static_cast<std::int64_t>(std::min(x.size(), y.size()));
#pragma omp parallel for simd schedule(static) num_threads(clamp_threads(threads))
  for (std::int64_t i = 0; i < n; ++i) y[i] = a * x[i] + y[i];
}

void scatter_add(std::span<const double> x, std::span<const std::size_t> idx, std::span<double> y,
                 int threads) {
  // Each thread owns a contiguous slice of y and walks all of x in order, so
  // the per-entry summation order matches the serial loop exactly.
  const std::size_t count = std::min(x.size(), idx.size());
  const int nt = static_cast<int>(std::min<std::size_t>(clamp_threads(threads), std::max<std::size_t>(y.size(), 1)));
#pragma omp parallel num_threads(nt)
  {
    const auto t = static_cast<std::size_t>(omp_get_thread_num());
    const auto team = static_cast<std::size_t>(omp_get_num_threads());
    const std::size_t lo = y.size() * t / team;
    const std::size_t hi = y.size() * (t + 1) / team;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t target = idx[i];
      if (target >= lo && target < hi) y[target] += x[i];
    }
  }
}

double reduce_sum(std::span<const double> x, int threads) {
  const std::size_t blocks = block_count(x.size(), kReduceBlock);
  std::vector<double> partial(blocks, 0.0);
  const auto nb = static_cast<std::int64_t>(blocks);
#pragma omp parallel for schedule(static) num_threads(clamp_threads(threads))
  for (std::int64_t b = 0; b < nb; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kReduceBlock;
    const std::size_t hi = std::min(x.size(), lo + kReduceBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += x[i];
    partial[static_cast<std::size_t>(b)] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

void inplace(Functor f, std::span<double> y, int threads) {
  const auto n = static_cast<std::int64_t>(y.size());
  switch (f) {
    case Functor::square:
#pragma omp parallel for simd schedule(static) num_threads(clamp_threads(threads))
      for (std::int64_t i = 0; i < n; ++i) y[i] = y[i] * y[i];
      break;
    case Functor::sqrt:
#pragma omp parallel for schedule(static) num_threads(clamp_threads(threads))
      for (std::int64_t i = 0; i < n; ++i) y[i] = std::sqrt(y[i]);
      break;
    case Functor::negate:
#pragma omp parallel for simd schedule(static) num_threads(clamp_threads(threads))
      for (std::int64_t i = 0; i < n; ++i) y[i] = -y[i];
      break;
  }
}

void fill_uniform(std::span<double> out, std::uint64_t seed, int threads) {
  fill_blocks(out.size(), seed, threads, [&](std::mt19937_64& gen, std::size_t lo, std::size_t hi) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (std::size_t i = lo; i < hi; ++i) out[i] = dist(gen);
  });
}

void fill_normal(std::span<double> out, std::uint64_t seed, int threads) {
  fill_blocks(out.size(), seed, threads, [&](std::mt19937_64& gen, std::size_t lo, std::size_t hi) {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (std::size_t i = lo; i < hi; ++i) out[i] = dist(gen);
  });
}

void fill_indices(std::span<std::size_t> out, std::size_t bound, std::uint64_t seed, int threads) {
  fill_blocks(out.size(), seed, threads, [&](std::mt19937_64& gen, std::size_t lo, std::size_t hi) {
    std::uniform_int_distribution<std::size_t> dist(0, bound - 1);
    for (std::size_t i = lo; i < hi; ++i) out[i] = dist(gen);
  });
}

}  // namespace wfmini::kernels
