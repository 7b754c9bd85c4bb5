#pragma once

// Numeric bodies of the compute kernels. Everything in wfmini::kernels is
// OpenMP-parallel; wfmini::kernels::serial holds the straight-line reference
// versions used by tests and by the bench target.
//
// Results never depend on the thread count: reductions use fixed-size blocks
// combined in block order, scatter-add partitions the destination, and the
// generators are seeded per block.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace wfmini::kernels {

enum class Functor { square, sqrt, negate };

Functor parse_functor(std::string_view name);
std::string_view to_string(Functor f) noexcept;

inline constexpr std::size_t kReduceBlock = 4096;
inline constexpr std::size_t kFillBlock = 4096;

constexpr bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

/// Axis lengths used when a power-of-two buffer is transformed over `dims`
/// axes: log2(n) bits are dealt round-robin, leading axes get the remainder.
std::vector<std::size_t> fft_shape(std::size_t n, int dims);

/// Row-major C(m x n) = A(m x k) * B(k x n).
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n, int threads);

/// Forward, unnormalized, in place. data.size() must be a power of two.
void fft(std::span<std::complex<double>> data, int transform_dim, int threads);

void axpy(double a, std::span<const double> x, std::span<double> y, int threads);

/// y[idx[i]] += x[i]; additions into each y entry happen in ascending i.
void scatter_add(std::span<const double> x, std::span<const std::size_t> idx, std::span<double> y,
                 int threads);

double reduce_sum(std::span<const double> x, int threads);

void inplace(Functor f, std::span<double> y, int threads);

void fill_uniform(std::span<double> out, std::uint64_t seed, int threads);
void fill_normal(std::span<double> out, std::uint64_t seed, int threads);
void fill_indices(std::span<std::size_t> out, std::size_t bound, std::uint64_t seed, int threads);

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void fft(std::span<std::complex<double>> data, int transform_dim);
void axpy(double a, std::span<const double> x, std::span<double> y);
void scatter_add(std::span<const double> x, std::span<const std::size_t> idx, std::span<double> y);
double reduce_sum(std::span<const double> x);
void inplace(Functor f, std::span<double> y);
void fill_uniform(std::span<double> out, std::uint64_t seed);
void fill_normal(std::span<double> out, std::uint64_t seed);

}  // namespace serial

}  // namespace wfmini::kernels
