// Scalar reference kernels. These define the numeric contract; the SIMD
// variants must reproduce them bit for bit (build disables FP contraction).

#include <algorithm>

#include "lvseg/kernels.hpp"

namespace lvseg::kernels::detail {

namespace {
inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }
}  // namespace

void conv_rows_scalar(const double* src, double* dst, int rows, int cols, const double* taps,
                      int half, Border border) {
  for (int r = 0; r < rows; ++r) {
    const double* in = src + static_cast<std::size_t>(r) * cols;
    double* out = dst + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      if (border == Border::Zero) {
        const int k0 = std::max(-half, -c);
        const int k1 = std::min(half, cols - 1 - c);
        for (int k = k0; k <= k1; ++k) acc += taps[k + half] * in[c + k];
      } else {
        for (int k = -half; k <= half; ++k) acc += taps[k + half] * in[clamp_index(c + k, cols)];
      }
      out[c] = acc;
    }
  }
}

void conv_cols_scalar(const double* src, double* dst, int rows, int cols, const double* taps,
                      int half, Border border) {
  for (int r = 0; r < rows; ++r) {
    double* out = dst + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) out[c] = 0.0;
    for (int k = -half; k <= half; ++k) {
      const int rr = r + k;
      const double w = taps[k + half];
      const double* in;
      if (border == Border::Zero) {
        if (rr < 0 || rr >= rows) continue;
        in = src + static_cast<std::size_t>(rr) * cols;
      } else {
        in = src + static_cast<std::size_t>(clamp_index(rr, rows)) * cols;
      }
      for (int c = 0; c < cols; ++c) out[c] += w * in[c];
    }
  }
}

void multiply_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_offset_scalar(const double* a, double alpha, double beta, double* out,
                         std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * alpha + beta;
}

void ratio_floor_scalar(const double* num, const double* den, double den_floor, double* out,
                        std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = num[i] / std::max(den[i], den_floor);
}

void directional_relu_scalar(const double* gx, const double* gy, double c, double s,
                             double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::max(0.0, gx[i] * c + gy[i] * s);
}

void gauss_fit_residual_scalar(const double* img, const double* c0, const double* c1,
                               const double* c2, const double* c3, double* out,
                               std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = img[i];
    out[i] = c0[i] + v * v * c1[i] - 2.0 * v * c2[i] + c3[i];
  }
}

double sum_scalar(const double* a, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    acc[0] += a[i];
    acc[1] += a[i + 1];
    acc[2] += a[i + 2];
    acc[3] += a[i + 3];
  }
  double total = (acc[0] + acc[2]) + (acc[1] + acc[3]);
  for (std::size_t i = n4; i < n; ++i) total += a[i];
  return total;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    acc[0] += a[i] * b[i];
    acc[1] += a[i + 1] * b[i + 1];
    acc[2] += a[i + 2] * b[i + 2];
    acc[3] += a[i + 3] * b[i + 3];
  }
  double total = (acc[0] + acc[2]) + (acc[1] + acc[3]);
  for (std::size_t i = n4; i < n; ++i) total += a[i] * b[i];
  return total;
}

void min_max_scalar(const double* a, std::size_t n, double& lo, double& hi) {
  double mn = a[0], mx = a[0];
  for (std::size_t i = 1; i < n; ++i) {
    mn = std::min(mn, a[i]);
    mx = std::max(mx, a[i]);
  }
  lo = mn;
  hi = mx;
}

}  // namespace lvseg::kernels::detail
