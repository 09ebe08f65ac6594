#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "lvseg/kernels.hpp"
#include "lvseg/rng.hpp"

using namespace lvseg;
namespace kd = lvseg::kernels::detail;

namespace {
std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 10.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = (rng.uniform() * 2.0 - 1.0) * scale;
  return v;
}

std::vector<double> gaussian_taps(double sigma, int half) {
  std::vector<double> t(2 * half + 1);
  double s = 0;
  for (int i = -half; i <= half; ++i) s += t[i + half] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& x : t) x /= s;
  return t;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}
}  // namespace

TEST_CASE("scalar convolution semantics") {
  // identity kernel
  const std::vector<double> id = {0.0, 1.0, 0.0};
  std::vector<double> src = {1, 2, 3, 4, 5, 6}, dst(6);
  kd::conv_rows_scalar(src.data(), dst.data(), 2, 3, id.data(), 1, kernels::Border::Zero);
  CHECK(dst == src);
  kd::conv_cols_scalar(src.data(), dst.data(), 2, 3, id.data(), 1, kernels::Border::Replicate);
  CHECK(dst == src);

  // border semantics of a box kernel on one row
  const std::vector<double> box = {1.0, 1.0, 1.0};
  std::vector<double> row = {1, 2, 3};
  std::vector<double> out(3);
  kd::conv_rows_scalar(row.data(), out.data(), 1, 3, box.data(), 1, kernels::Border::Zero);
  CHECK(out == std::vector<double>{3, 6, 5});
  kd::conv_rows_scalar(row.data(), out.data(), 1, 3, box.data(), 1, kernels::Border::Replicate);
  CHECK(out == std::vector<double>{4, 6, 8});
  kd::conv_cols_scalar(row.data(), out.data(), 3, 1, box.data(), 1, kernels::Border::Zero);
  CHECK(out == std::vector<double>{3, 6, 5});
}

TEST_CASE("reduction order is the documented lane schedule") {
  const std::vector<double> v = {1, 2, 3, 4, 5, 6, 7};  // n = 7, tail of 3
  const double expected = ((1.0 + 3.0) + (2.0 + 4.0)) + 5.0 + 6.0 + 7.0;
  CHECK(kd::sum_scalar(v.data(), v.size()) == expected);
}

#if defined(__x86_64__) || defined(_M_X64)
TEST_CASE("avx2 variants are bit-identical to scalar") {
  if (!kernels::backend_supported(kernels::Backend::Avx2)) {
    MESSAGE("AVX2 unavailable; skipping equivalence");
    return;
  }
  Rng rng(20240817);
  for (int trial = 0; trial < 50; ++trial) {
    const int rows = 1 + static_cast<int>(rng.below(40));
    const int cols = 1 + static_cast<int>(rng.below(40));
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    const int half = static_cast<int>(rng.below(9));
    const auto taps = gaussian_taps(0.5 + rng.uniform() * 3.0, half);
    const auto a = random_vec(rng, n), b = random_vec(rng, n);

    std::vector<double> s(n), x(n);
    for (auto border : {kernels::Border::Zero, kernels::Border::Replicate}) {
      kd::conv_rows_scalar(a.data(), s.data(), rows, cols, taps.data(), half, border);
      kd::conv_rows_avx2(a.data(), x.data(), rows, cols, taps.data(), half, border);
      CHECK(bit_equal(s, x));
      kd::conv_cols_scalar(a.data(), s.data(), rows, cols, taps.data(), half, border);
      kd::conv_cols_avx2(a.data(), x.data(), rows, cols, taps.data(), half, border);
      CHECK(bit_equal(s, x));
    }

    kd::multiply_scalar(a.data(), b.data(), s.data(), n);
    kd::multiply_avx2(a.data(), b.data(), x.data(), n);
    CHECK(bit_equal(s, x));

    kd::scale_offset_scalar(a.data(), 1.7, -0.3, s.data(), n);
    kd::scale_offset_avx2(a.data(), 1.7, -0.3, x.data(), n);
    CHECK(bit_equal(s, x));

    kd::ratio_floor_scalar(a.data(), b.data(), 1e-12, s.data(), n);
    kd::ratio_floor_avx2(a.data(), b.data(), 1e-12, x.data(), n);
    CHECK(bit_equal(s, x));

    kd::directional_relu_scalar(a.data(), b.data(), 0.6, -0.8, s.data(), n);
    kd::directional_relu_avx2(a.data(), b.data(), 0.6, -0.8, x.data(), n);
    CHECK(bit_equal(s, x));

    const auto c2 = random_vec(rng, n), c3 = random_vec(rng, n);
    kd::gauss_fit_residual_scalar(a.data(), b.data(), c2.data(), c3.data(), a.data(), s.data(), n);
    kd::gauss_fit_residual_avx2(a.data(), b.data(), c2.data(), c3.data(), a.data(), x.data(), n);
    CHECK(bit_equal(s, x));

    CHECK(kd::sum_scalar(a.data(), n) == kd::sum_avx2(a.data(), n));
    CHECK(kd::dot_scalar(a.data(), b.data(), n) == kd::dot_avx2(a.data(), b.data(), n));

    double slo, shi, xlo, xhi;
    kd::min_max_scalar(a.data(), n, slo, shi);
    kd::min_max_avx2(a.data(), n, xlo, xhi);
    CHECK(slo == xlo);
    CHECK(shi == xhi);
  }
}
#endif

TEST_CASE("backend dispatch honors set_backend") {
  const auto original = kernels::active_backend();
  kernels::set_backend(kernels::Backend::Scalar);
  CHECK(kernels::active_backend() == kernels::Backend::Scalar);
  std::vector<double> a = {1, 2, 3}, b = {4, 5, 6}, out(3);
  kernels::multiply(a.data(), b.data(), out.data(), 3);
  CHECK(out == std::vector<double>{4, 10, 18});
  kernels::set_backend(original);
}
