#include <complex>

#include "builtin.hpp"
#include "wfmini/kernels/dense.hpp"

namespace wfmini::kernels {

namespace {

std::size_t size_param(const KernelCall& call, std::string_view name) {
  return static_cast<std::size_t>(call.integer(name));
}

KernelResult mat_mul_simple_2d(const KernelCall& call, KernelContext& ctx) {
  const auto dim = size_param(call, "dim");
  std::vector<double> a(dim * dim), b(dim * dim), c(dim * dim);
  fill_uniform(a, salted(ctx.task_seed, "matMulSimple2D.A"), ctx.threads);
  fill_uniform(b, salted(ctx.task_seed, "matMulSimple2D.B"), ctx.threads);
  matmul(a, b, c, dim, dim, dim, ctx.threads);
  return {.checksum = reduce_sum(c, ctx.threads)};
}

KernelResult mat_mul_general(const KernelCall& call, KernelContext& ctx) {
  double checksum = 0.0;
  std::vector<double> a, b, c;
  for (const auto& [m, k, n] : call.dims("dim_list")) {
    const auto um = static_cast<std::size_t>(m), uk = static_cast<std::size_t>(k), un = static_cast<std::size_t>(n);
    a.resize(um * uk);
    b.resize(uk * un);
    c.resize(um * un);
    fill_uniform(a, salted(ctx.task_seed, "matMulGeneral.A"), ctx.threads);
    fill_uniform(b, salted(ctx.task_seed, "matMulGeneral.B"), ctx.threads);
    matmul(a, b, c, um, uk, un, ctx.threads);
    checksum += reduce_sum(c, ctx.threads);
  }
  return {.checksum = checksum};
}

KernelResult fft_kernel(const KernelCall& call, KernelContext& ctx) {
  const auto n = size_param(call, "data_size");
  std::vector<double> re(n), im(n);
  fill_uniform(re, salted(ctx.task_seed, "fft.re"), ctx.threads);
  fill_uniform(im, salted(ctx.task_seed, "fft.im"), ctx.threads);
  std::vector<std::complex<double>> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = {re[i], im[i]};
  fft(data, static_cast<int>(call.integer_or("transform_dim", 1)), ctx.threads);
  double sum = 0.0;
  for (const auto& v : data) sum += v.real() + v.imag();
  return {.checksum = sum};
}

KernelResult rng_kernel(const KernelCall& call, KernelContext& ctx) {
  const auto n = size_param(call, "data_size");
  const auto seed = call.has("seed") ? static_cast<std::uint64_t>(call.integer("seed")) : ctx.rank_seed;
  std::vector<double> out(n);
  if (call.string_or("distribution", "uniform") == "normal")
    fill_normal(out, seed, ctx.threads);
  else
    fill_uniform(out, seed, ctx.threads);
  return {.checksum = reduce_sum(out, ctx.threads)};
}

KernelResult axpy_kernel(const KernelCall& call, KernelContext& ctx) {
  const auto n = size_param(call, "data_size");
  std::vector<double> x(n), y(n);
  fill_uniform(x, salted(ctx.task_seed, "axpy.x"), ctx.threads);
  fill_uniform(y, salted(ctx.task_seed, "axpy.y"), ctx.threads);
  axpy(call.real_or("a", 2.0), x, y, ctx.threads);
  return {.checksum = reduce_sum(y, ctx.threads)};
}

KernelResult scatter_add_kernel(const KernelCall& call, KernelContext& ctx) {
  const auto nx = size_param(call, "x_size");
  const auto ny = size_param(call, "y_size");
  std::vector<double> x(nx), y(ny);
  std::vector<std::size_t> idx(nx);
  fill_uniform(x, salted(ctx.task_seed, "scatterAdd.x"), ctx.threads);
  fill_uniform(y, salted(ctx.task_seed, "scatterAdd.y"), ctx.threads);
  fill_indices(idx, ny, salted(ctx.task_seed, "scatterAdd.idx"), ctx.threads);
  scatter_add(x, idx, y, ctx.threads);
  return {.checksum = reduce_sum(y, ctx.threads)};
}

KernelResult reduction_kernel(const KernelCall& call, KernelContext& ctx) {
  std::vector<double> x(size_param(call, "data_size"));
  fill_uniform(x, salted(ctx.task_seed, "reduction.x"), ctx.threads);
  return {.checksum = reduce_sum(x, ctx.threads)};
}

KernelResult inplace_kernel(const KernelCall& call, KernelContext& ctx) {
  std::vector<double> y(size_param(call, "data_size"));
  fill_uniform(y, salted(ctx.task_seed, "inplaceCompute.y"), ctx.threads);
  inplace(parse_functor(call.string("functor")), y, ctx.threads);
  return {.checksum = reduce_sum(y, ctx.threads)};
}

}  // namespace

std::vector<KernelSpec> compute_kernels() {
  using enum ParamType;
  return {
      {"matMulSimple2D", mat_mul_simple_2d, {{"dim", integer}}, false, "C = A*B on dim x dim operands"},
      {"matMulGeneral", mat_mul_general, {{"dim_list", dim_list, true, Constraint::none}}, false,
       "one m x k by k x n product per [m,k,n] entry"},
      {"fft", fft_kernel,
       {{"data_size", integer, true, Constraint::power_of_two}, {"transform_dim", integer, false}, {"type_in", string, false, Constraint::none, {"complex"}}},
       false, "radix-2 complex transform over transform_dim axes"},
      {"RNG", rng_kernel,
       {{"data_size", integer},
        {"distribution", string, false, Constraint::none, {"uniform", "normal"}},
        {"seed", integer, false, Constraint::non_negative}},
       false, "seeded uniform or normal fill"},
      {"axpy", axpy_kernel, {{"data_size", integer}, {"a", real, false, Constraint::none}}, false, "y = a*x + y"},
      {"scatterAdd", scatter_add_kernel, {{"x_size", integer}, {"y_size", integer}}, false, "y[idx[i]] += x[i]"},
      {"reduction", reduction_kernel, {{"data_size", integer}}, false, "sum of a seeded buffer"},
      {"inplaceCompute", inplace_kernel,
       {{"data_size", integer}, {"functor", string, true, Constraint::none, {"square", "sqrt", "negate"}}}, false,
       "y[i] = f(y[i])"},
  };
}

}  // namespace wfmini::kernels
