#ifndef LVSEG_KERNELS_HPP
#define LVSEG_KERNELS_HPP

#include <cstddef>
#include <string>

namespace lvseg::kernels {

// Data-parallel inner loops used by the feature extractor and the level-set
// solver. Every operation has a scalar reference implementation and an AVX2
// variant; the dispatcher picks one at runtime. Variants are bit-identical by
// construction: per-element operations share the evaluation order of the
// scalar code, and reductions fix a canonical 4-lane summation order
// (documented at sum/dot below). Equivalence is enforced by tests/test_kernels.

enum class Backend { Scalar, Avx2 };

Backend active_backend();
bool backend_supported(Backend b);
/// Force a backend (tests, benchmarking). Throws UsageError if unsupported on
/// this CPU. Honors environment variable LVSEG_BACKEND=scalar|avx2 at startup.
void set_backend(Backend b);
std::string backend_name(Backend b);

enum class Border {
  Zero,      // out-of-image samples contribute 0
  Replicate  // out-of-image samples clamp to the nearest edge pixel
};

/// Horizontal pass of a separable convolution: for every row,
/// dst[c] = sum_{k=-half..half} taps[k+half] * src[c+k] under `border`.
/// taps has 2*half+1 entries. src != dst.
void conv_rows(const double* src, double* dst, int rows, int cols, const double* taps,
               int half, Border border);

/// Vertical pass, same contract applied along columns.
void conv_cols(const double* src, double* dst, int rows, int cols, const double* taps,
               int half, Border border);

/// out[i] = a[i] * b[i]
void multiply(const double* a, const double* b, double* out, std::size_t n);

/// out[i] = a[i] * alpha + beta
void scale_offset(const double* a, double alpha, double beta, double* out, std::size_t n);

/// out[i] = num[i] / max(den[i], den_floor)
void ratio_floor(const double* num, const double* den, double den_floor, double* out,
                 std::size_t n);

/// Half-rectified directional derivative: out[i] = max(0, gx[i]*c + gy[i]*s).
void directional_relu(const double* gx, const double* gy, double c, double s, double* out,
                      std::size_t n);

/// Local-Gaussian data-term assembly from precomputed convolution fields:
/// out[i] = c0[i] + img[i]^2 * c1[i] - 2*img[i]*c2[i] + c3[i]
void gauss_fit_residual(const double* img, const double* c0, const double* c1,
                        const double* c2, const double* c3, double* out, std::size_t n);

/// Reductions use a fixed summation order so results are reproducible and
/// backend-independent: four stride-4 lane accumulators a0..a3 combined as
/// (a0+a2) + (a1+a3), then the tail elements added in index order.
double sum(const double* a, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);

/// Running min/max over a (n >= 1).
void min_max(const double* a, std::size_t n, double& lo, double& hi);

namespace detail {
// Per-backend entry points, exposed for the equivalence tests.
#define LVSEG_KERNEL_VARIANTS(SUFFIX)                                                        \
  void conv_rows_##SUFFIX(const double*, double*, int, int, const double*, int, Border);     \
  void conv_cols_##SUFFIX(const double*, double*, int, int, const double*, int, Border);     \
  void multiply_##SUFFIX(const double*, const double*, double*, std::size_t);                \
  void scale_offset_##SUFFIX(const double*, double, double, double*, std::size_t);           \
  void ratio_floor_##SUFFIX(const double*, const double*, double, double*, std::size_t);     \
  void directional_relu_##SUFFIX(const double*, const double*, double, double, double*,      \
                                 std::size_t);                                               \
  void gauss_fit_residual_##SUFFIX(const double*, const double*, const double*,              \
                                   const double*, const double*, double*, std::size_t);      \
  double sum_##SUFFIX(const double*, std::size_t);                                           \
  double dot_##SUFFIX(const double*, const double*, std::size_t);                            \
  void min_max_##SUFFIX(const double*, std::size_t, double&, double&)

LVSEG_KERNEL_VARIANTS(scalar);
#if defined(__x86_64__) || defined(_M_X64)
LVSEG_KERNEL_VARIANTS(avx2);
#endif
#undef LVSEG_KERNEL_VARIANTS
}  // namespace detail

}  // namespace lvseg::kernels

#endif
