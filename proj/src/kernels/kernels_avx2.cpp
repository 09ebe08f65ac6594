// AVX2 kernel variants. Each loop mirrors the scalar reference exactly:
// per-element operation order is identical and reductions keep the canonical
// lane order, so outputs are bit-identical to kernels_scalar.cpp.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>

#include "lvseg/kernels.hpp"

namespace lvseg::kernels::detail {

namespace {
inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

inline double reduce_lanes(__m256d v) {
  // (l0+l2) + (l1+l3), matching the scalar accumulator combine
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(s) + _mm_cvtsd_f64(_mm_unpackhi_pd(s, s));
}
}  // namespace

void conv_rows_avx2(const double* src, double* dst, int rows, int cols, const double* taps,
                    int half, Border border) {
  const int interior_begin = std::min(half, cols);
  const int interior_end = std::max(interior_begin, cols - half);
  for (int r = 0; r < rows; ++r) {
    const double* in = src + static_cast<std::size_t>(r) * cols;
    double* out = dst + static_cast<std::size_t>(r) * cols;

    auto edge = [&](int c) {
      double acc = 0.0;
      if (border == Border::Zero) {
        const int k0 = std::max(-half, -c);
        const int k1 = std::min(half, cols - 1 - c);
        for (int k = k0; k <= k1; ++k) acc += taps[k + half] * in[c + k];
      } else {
        for (int k = -half; k <= half; ++k) acc += taps[k + half] * in[clamp_index(c + k, cols)];
      }
      out[c] = acc;
    };

    for (int c = 0; c < interior_begin; ++c) edge(c);

    int c = interior_begin;
    for (; c + 4 <= interior_end; c += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (int k = -half; k <= half; ++k) {
        const __m256d w = _mm256_set1_pd(taps[k + half]);
        const __m256d v = _mm256_loadu_pd(in + c + k);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(w, v));
      }
      _mm256_storeu_pd(out + c, acc);
    }
    for (; c < interior_end; ++c) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) acc += taps[k + half] * in[c + k];
      out[c] = acc;
    }

    for (c = interior_end; c < cols; ++c) edge(c);
  }
}

void conv_cols_avx2(const double* src, double* dst, int rows, int cols, const double* taps,
                    int half, Border border) {
  for (int r = 0; r < rows; ++r) {
    double* out = dst + static_cast<std::size_t>(r) * cols;
    int c = 0;
    const __m256d zero = _mm256_setzero_pd();
    for (; c + 4 <= cols; c += 4) _mm256_storeu_pd(out + c, zero);
    for (; c < cols; ++c) out[c] = 0.0;

    for (int k = -half; k <= half; ++k) {
      const int rr = r + k;
      const double* in;
      if (border == Border::Zero) {
        if (rr < 0 || rr >= rows) continue;
        in = src + static_cast<std::size_t>(rr) * cols;
      } else {
        in = src + static_cast<std::size_t>(clamp_index(rr, rows)) * cols;
      }
      const double w = taps[k + half];
      const __m256d vw = _mm256_set1_pd(w);
      c = 0;
      for (; c + 4 <= cols; c += 4) {
        __m256d acc = _mm256_loadu_pd(out + c);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(vw, _mm256_loadu_pd(in + c)));
        _mm256_storeu_pd(out + c, acc);
      }
      for (; c < cols; ++c) out[c] += w * in[c];
    }
  }
}

void multiply_avx2(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_offset_avx2(const double* a, double alpha, double beta, double* out,
                       std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  const __m256d vb = _mm256_set1_pd(beta);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_mul_pd(_mm256_loadu_pd(a + i), va);
    _mm256_storeu_pd(out + i, _mm256_add_pd(v, vb));
  }
  for (; i < n; ++i) out[i] = a[i] * alpha + beta;
}

void ratio_floor_avx2(const double* num, const double* den, double den_floor, double* out,
                      std::size_t n) {
  const __m256d vf = _mm256_set1_pd(den_floor);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_max_pd(_mm256_loadu_pd(den + i), vf);
    _mm256_storeu_pd(out + i, _mm256_div_pd(_mm256_loadu_pd(num + i), d));
  }
  for (; i < n; ++i) out[i] = num[i] / std::max(den[i], den_floor);
}

void directional_relu_avx2(const double* gx, const double* gy, double c, double s,
                           double* out, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d vs = _mm256_set1_pd(s);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d g = _mm256_add_pd(_mm256_mul_pd(_mm256_loadu_pd(gx + i), vc),
                              _mm256_mul_pd(_mm256_loadu_pd(gy + i), vs));
    _mm256_storeu_pd(out + i, _mm256_max_pd(zero, g));
  }
  for (; i < n; ++i) out[i] = std::max(0.0, gx[i] * c + gy[i] * s);
}

void gauss_fit_residual_avx2(const double* img, const double* c0, const double* c1,
                             const double* c2, const double* c3, double* out,
                             std::size_t n) {
  const __m256d two = _mm256_set1_pd(2.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(img + i);
    __m256d acc = _mm256_add_pd(_mm256_loadu_pd(c0 + i),
                                _mm256_mul_pd(_mm256_mul_pd(v, v), _mm256_loadu_pd(c1 + i)));
    acc = _mm256_sub_pd(acc,
                        _mm256_mul_pd(_mm256_mul_pd(two, v), _mm256_loadu_pd(c2 + i)));
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(c3 + i));
    _mm256_storeu_pd(out + i, acc);
  }
  for (; i < n; ++i) {
    const double v = img[i];
    out[i] = c0[i] + v * v * c1[i] - 2.0 * v * c2[i] + c3[i];
  }
}

double sum_avx2(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double total = reduce_lanes(acc);
  for (std::size_t i = n4; i < n; ++i) total += a[i];
  return total;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4)
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  double total = reduce_lanes(acc);
  for (std::size_t i = n4; i < n; ++i) total += a[i] * b[i];
  return total;
}

void min_max_avx2(const double* a, std::size_t n, double& lo, double& hi) {
  if (n < 8) {
    double mn = a[0], mx = a[0];
    for (std::size_t i = 1; i < n; ++i) {
      mn = std::min(mn, a[i]);
      mx = std::max(mx, a[i]);
    }
    lo = mn;
    hi = mx;
    return;
  }
  __m256d vmn = _mm256_loadu_pd(a);
  __m256d vmx = vmn;
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 4; i < n4; i += 4) {
    const __m256d v = _mm256_loadu_pd(a + i);
    vmn = _mm256_min_pd(vmn, v);
    vmx = _mm256_max_pd(vmx, v);
  }
  alignas(32) double bmn[4], bmx[4];
  _mm256_store_pd(bmn, vmn);
  _mm256_store_pd(bmx, vmx);
  double mn = std::min(std::min(bmn[0], bmn[1]), std::min(bmn[2], bmn[3]));
  double mx = std::max(std::max(bmx[0], bmx[1]), std::max(bmx[2], bmx[3]));
  for (std::size_t i = n4; i < n; ++i) {
    mn = std::min(mn, a[i]);
    mx = std::max(mx, a[i]);
  }
  lo = mn;
  hi = mx;
}

}  // namespace lvseg::kernels::detail

#endif  // x86_64
