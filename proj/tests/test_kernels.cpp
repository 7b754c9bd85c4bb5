#include <doctest.h>

#include <random>
#include <thread>

#include "oracles.hpp"
#include "wfmini/comm.hpp"
#include "wfmini/error.hpp"
#include "wfmini/kernels/dense.hpp"

using namespace wfmini;
namespace k = wfmini::kernels;

namespace {

std::vector<double> ints(std::size_t n, std::mt19937_64& rng, int lo = -9, int hi = 9) {
  std::uniform_int_distribution<int> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<double> reals(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("matmul matches triple loop") {
  std::mt19937_64 rng(1);
  for (std::size_t m : {1, 3, 17, 64})
    for (std::size_t kk : {1, 5, 64})
      for (std::size_t n : {1, 8, 33}) {
        auto a = ints(m * kk, rng), b = ints(kk * n, rng);
        const auto want = oracle::matmul(a, b, m, kk, n);
        std::vector<double> c(m * n), cs(m * n);
        k::matmul(a, b, c, m, kk, n, 4);
        k::serial::matmul(a, b, cs, m, kk, n);
        CHECK(c == want);
        CHECK(cs == want);
      }
  auto a = reals(40 * 30, rng), b = reals(30 * 20, rng);
  const auto want = oracle::matmul(a, b, 40, 30, 20);
  std::vector<double> c(40 * 20);
  k::matmul(a, b, c, 40, 30, 20, 3);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(oracle::close(c[i], want[i], 1e-9));
}

TEST_CASE("fft matches direct DFT for every power of two up to 64") {
  std::mt19937_64 rng(2);
  for (std::size_t n = 2; n <= 64; n *= 2) {
    for (int dims = 1; dims <= 3; ++dims) {
      std::vector<std::complex<double>> x(n);
      std::uniform_real_distribution<double> d(-1, 1);
      for (auto& v : x) v = {d(rng), d(rng)};
      const auto want = oracle::dft(x, k::fft_shape(n, dims));
      auto par = x, ser = x;
      k::fft(par, dims, 4);
      k::serial::fft(ser, dims);
      double scale = 1;
      for (const auto& w : want) scale = std::max(scale, std::abs(w));
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(par[i] - want[i]) <= 1e-9 * scale);
        CHECK(std::abs(ser[i] - want[i]) <= 1e-9 * scale);
      }
    }
  }
}

TEST_CASE("fft shape deals bits round robin") {
  CHECK(k::fft_shape(64, 1) == std::vector<std::size_t>{64});
  CHECK(k::fft_shape(64, 2) == std::vector<std::size_t>{8, 8});
  CHECK(k::fft_shape(32, 2) == std::vector<std::size_t>{8, 4});
  CHECK(k::fft_shape(2, 3) == std::vector<std::size_t>{2});  // never more axes than bits
}

TEST_CASE("axpy, scatter_add, reduction and inplace match loops") {
  std::mt19937_64 rng(3);
  for (std::size_t n : {1, 2, 7, 64}) {
    auto x = ints(n, rng), y = ints(n, rng);
    auto want = y;
    for (std::size_t i = 0; i < n; ++i) want[i] += 3.0 * x[i];
    auto got = y;
    k::axpy(3.0, x, got, 4);
    CHECK(got == want);

    std::vector<std::size_t> idx(n);
    std::uniform_int_distribution<std::size_t> pick(0, n / 2);
    for (auto& i : idx) i = pick(rng);
    auto ys = ints(n / 2 + 1, rng);
    auto sc = ys;
    k::scatter_add(x, idx, sc, 4);
    CHECK(sc == oracle::scatter_add(x, idx, ys));
    auto sc2 = ys;
    k::serial::scatter_add(x, idx, sc2);
    CHECK(sc2 == sc);

    CHECK(k::reduce_sum(x, 4) == oracle::sum(x));
    CHECK(k::serial::reduce_sum(x) == oracle::sum(x));

    auto sq = x;
    k::inplace(k::Functor::square, sq, 4);
    auto neg = x;
    k::inplace(k::Functor::negate, neg, 4);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(sq[i] == x[i] * x[i]);
      CHECK(neg[i] == -x[i]);
    }
    auto pos = ints(n, rng, 0, 20);
    auto rt = pos;
    k::inplace(k::Functor::sqrt, rt, 4);
    for (std::size_t i = 0; i < n; ++i) CHECK(oracle::close(rt[i], std::sqrt(pos[i]), 1e-12));
  }
}

TEST_CASE("reduction is independent of thread count") {
  std::mt19937_64 rng(4);
  auto x = reals(100'000, rng);
  const double one = k::reduce_sum(x, 1);
  CHECK(k::reduce_sum(x, 2) == one);
  CHECK(k::reduce_sum(x, 7) == one);
  CHECK(oracle::close(one, oracle::sum(x), 1e-9));
}

TEST_CASE("fills are seeded per block") {
  std::vector<double> a(10'000), b(10'000), c(10'000);
  k::fill_uniform(a, 42, 1);
  k::fill_uniform(b, 42, 5);
  k::serial::fill_uniform(c, 42);
  CHECK(a == b);
  CHECK(a == c);
  for (double v : a) {
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
  k::fill_normal(a, 7, 1);
  k::fill_normal(b, 7, 3);
  CHECK(a == b);
  k::fill_uniform(c, 43, 1);
  CHECK(c != b);
}

TEST_CASE("functor names") {
  CHECK(k::parse_functor("square") == k::Functor::square);
  CHECK(k::to_string(k::Functor::sqrt) == "sqrt");
  CHECK_THROWS_AS(k::parse_functor("cube"), Error);
}

namespace {

template <class F>
void spmd(int n, F f) {
  auto comms = Communicator::create(n, std::chrono::seconds(10));
  std::vector<std::jthread> ts;
  for (int r = 0; r < n; ++r) ts.emplace_back([&, r] { f(comms[static_cast<std::size_t>(r)]); });
}

}  // namespace

TEST_CASE("allreduce and allgather match rank-ordered loops") {
  for (int ranks : {1, 2, 3, 4}) {
    for (std::size_t n : {1, 5, 64}) {
      std::vector<std::vector<double>> local(static_cast<std::size_t>(ranks));
      std::mt19937_64 rng(static_cast<std::uint64_t>(ranks * 100 + n));
      for (auto& l : local) l = ints(n, rng);
      std::vector<double> want_sum(n, 0.0);
      std::vector<double> want_gather;
      for (const auto& l : local) {
        for (std::size_t i = 0; i < n; ++i) want_sum[i] += l[i];
        want_gather.insert(want_gather.end(), l.begin(), l.end());
      }
      std::vector<std::vector<double>> sums(local.size()), gathers(local.size());
      spmd(ranks, [&](const Communicator& c) {
        const auto r = static_cast<std::size_t>(c.rank_id());
        auto buf = local[r];
        c.allreduce(buf, 2);
        sums[r] = buf;
        gathers[r] = c.allgather(local[r]);
      });
      for (std::size_t r = 0; r < local.size(); ++r) {
        CHECK(sums[r] == want_sum);
        CHECK(gathers[r] == want_gather);
      }
    }
  }
}

TEST_CASE("mismatched collective sizes are reported") {
  std::vector<int> codes(2, -1);
  spmd(2, [&](const Communicator& c) {
    std::vector<double> buf(c.rank_id() == 0 ? 4 : 5, 1.0);
    try {
      c.allreduce(buf);
    } catch (const Error& e) {
      codes[static_cast<std::size_t>(c.rank_id())] = static_cast<int>(e.code());
    }
  });
  CHECK(codes[0] == static_cast<int>(ErrorCode::SizeMismatch));
  CHECK(codes[1] == static_cast<int>(ErrorCode::SizeMismatch));
}

TEST_CASE("a missing peer times out as a collective mismatch") {
  auto comms = Communicator::create(2, std::chrono::milliseconds(100));
  std::vector<double> buf(3, 1.0);
  try {
    comms[0].allreduce(buf);
    FAIL("expected timeout");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CollectiveMismatch);
  }
}
