// OpenMP kernels against their serial references: median time and max deviation.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <functional>
#include <iomanip>
#include <iostream>
#include <omp.h>
#include <vector>

#include <CLI11.hpp>

#include "wfmini/kernels/dense.hpp"

namespace k = wfmini::kernels;

namespace {

double median_time(int trials, const std::function<void()>& f) {
  std::vector<double> t;
  for (int i = 0; i < trials; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

double max_rel(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return m;
}

void row(const std::string& name, std::size_t size, double par, double ser, double dev) {
  std::cout << std::left << std::setw(14) << name << std::right << std::setw(10) << size << std::setw(14)
            << std::scientific << std::setprecision(3) << par << std::setw(14) << ser << std::setw(10)
            << std::fixed << std::setprecision(2) << ser / par << std::setw(12) << std::scientific
            << std::setprecision(1) << dev << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compare OpenMP kernels with the serial references", "wfmini_bench"};
  int threads = omp_get_max_threads(), trials = 5;
  std::size_t dim = 256, n = 1 << 22;
  bool quick = false;
  app.add_option("--threads", threads, "OpenMP threads")->check(CLI::PositiveNumber);
  app.add_option("--trials", trials, "Timed repetitions (median reported)")->check(CLI::PositiveNumber);
  app.add_option("--dim", dim, "Matrix dimension");
  app.add_option("--n", n, "Vector length (power of two for fft)");
  app.add_flag("--quick", quick, "Small sizes, one trial");
  CLI11_PARSE(app, argc, argv);
  if (quick) {
    dim = 32;
    n = 1 << 12;
    trials = 1;
  }
  if (!k::is_power_of_two(n)) {
    std::cerr << "--n must be a power of two\n";
    return 1;
  }

  std::cout << "threads=" << threads << " trials=" << trials << '\n';
  std::cout << std::left << std::setw(14) << "kernel" << std::right << std::setw(10) << "size" << std::setw(14)
            << "omp_s" << std::setw(14) << "serial_s" << std::setw(10) << "speedup" << std::setw(12) << "max_dev"
            << '\n';
  double worst = 0;

  {
    std::vector<double> a(dim * dim), b(dim * dim), c1(dim * dim), c2(dim * dim);
    k::fill_uniform(a, 1, threads);
    k::fill_uniform(b, 2, threads);
    const double p = median_time(trials, [&] { k::matmul(a, b, c1, dim, dim, dim, threads); });
    const double s = median_time(trials, [&] { k::serial::matmul(a, b, c2, dim, dim, dim); });
    worst = std::max(worst, max_rel(c1, c2));
    row("matmul", dim, p, s, max_rel(c1, c2));
  }
  {
    std::vector<std::complex<double>> x(n), y1, y2;
    std::vector<double> re(n);
    k::fill_uniform(re, 3, threads);
    for (std::size_t i = 0; i < n; ++i) x[i] = re[i];
    const double p = median_time(trials, [&] {
      y1 = x;
      k::fft(y1, 1, threads);
    });
    const double s = median_time(trials, [&] {
      y2 = x;
      k::serial::fft(y2, 1);
    });
    double dev = 0;
    for (std::size_t i = 0; i < n; ++i) dev = std::max(dev, std::abs(y1[i] - y2[i]) / std::max(1.0, std::abs(y2[i])));
    worst = std::max(worst, dev);
    row("fft", n, p, s, dev);
  }
  {
    std::vector<double> x(n), y0(n), y1, y2;
    k::fill_uniform(x, 4, threads);
    k::fill_uniform(y0, 5, threads);
    const double p = median_time(trials, [&] {
      y1 = y0;
      k::axpy(2.5, x, y1, threads);
    });
    const double s = median_time(trials, [&] {
      y2 = y0;
      k::serial::axpy(2.5, x, y2);
    });
    worst = std::max(worst, max_rel(y1, y2));
    row("axpy", n, p, s, max_rel(y1, y2));
  }
  {
    std::vector<double> x(n);
    k::fill_uniform(x, 6, threads);
    double r1 = 0, r2 = 0;
    const double p = median_time(trials, [&] { r1 = k::reduce_sum(x, threads); });
    const double s = median_time(trials, [&] { r2 = k::serial::reduce_sum(x); });
    const double dev = std::abs(r1 - r2) / std::max(1.0, std::abs(r2));
    worst = std::max(worst, dev);
    row("reduction", n, p, s, dev);
  }
  {
    std::vector<double> x(n), y1(n / 16), y2(n / 16);
    std::vector<std::size_t> idx(n);
    k::fill_uniform(x, 7, threads);
    k::fill_indices(idx, y1.size(), 8, threads);
    const double p = median_time(trials, [&] {
      std::fill(y1.begin(), y1.end(), 0.0);
      k::scatter_add(x, idx, y1, threads);
    });
    const double s = median_time(trials, [&] {
      std::fill(y2.begin(), y2.end(), 0.0);
      k::serial::scatter_add(x, idx, y2);
    });
    worst = std::max(worst, max_rel(y1, y2));
    row("scatterAdd", n, p, s, max_rel(y1, y2));
  }
  {
    std::vector<double> y0(n), y1, y2;
    k::fill_uniform(y0, 9, threads);
    const double p = median_time(trials, [&] {
      y1 = y0;
      k::inplace(k::Functor::sqrt, y1, threads);
    });
    const double s = median_time(trials, [&] {
      y2 = y0;
      k::serial::inplace(k::Functor::sqrt, y2);
    });
    worst = std::max(worst, max_rel(y1, y2));
    row("inplace", n, p, s, max_rel(y1, y2));
  }
  // the two paths must agree; timing is informational
  return worst <= 1e-9 ? 0 : 1;
}
