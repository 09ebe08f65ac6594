// Runtime backend selection. No intrinsics here.

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "lvseg/errors.hpp"
#include "lvseg/kernels.hpp"

namespace lvseg::kernels {

namespace {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend detect_backend() {
  if (const char* env = std::getenv("LVSEG_BACKEND")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Backend::Avx2;
    return Backend::Scalar;
  }
  return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend> g_backend{detect_backend()};

}  // namespace

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
      return cpu_has_avx2();
  }
  return false;
}

void set_backend(Backend b) {
  if (!backend_supported(b))
    throw UsageError("kernel backend " + backend_name(b) + " not supported on this CPU");
  g_backend.store(b, std::memory_order_relaxed);
}

std::string backend_name(Backend b) {
  return b == Backend::Avx2 ? "avx2" : "scalar";
}

#if defined(__x86_64__) || defined(_M_X64)
#define LVSEG_DISPATCH(fn, ...)                                        \
  do {                                                                 \
    if (g_backend.load(std::memory_order_relaxed) == Backend::Avx2)    \
      return detail::fn##_avx2(__VA_ARGS__);                           \
    return detail::fn##_scalar(__VA_ARGS__);                           \
  } while (0)
#else
#define LVSEG_DISPATCH(fn, ...) return detail::fn##_scalar(__VA_ARGS__)
#endif

void conv_rows(const double* src, double* dst, int rows, int cols, const double* taps,
               int half, Border border) {
  LVSEG_DISPATCH(conv_rows, src, dst, rows, cols, taps, half, border);
}

void conv_cols(const double* src, double* dst, int rows, int cols, const double* taps,
               int half, Border border) {
  LVSEG_DISPATCH(conv_cols, src, dst, rows, cols, taps, half, border);
}

void multiply(const double* a, const double* b, double* out, std::size_t n) {
  LVSEG_DISPATCH(multiply, a, b, out, n);
}

void scale_offset(const double* a, double alpha, double beta, double* out, std::size_t n) {
  LVSEG_DISPATCH(scale_offset, a, alpha, beta, out, n);
}

void ratio_floor(const double* num, const double* den, double den_floor, double* out,
                 std::size_t n) {
  LVSEG_DISPATCH(ratio_floor, num, den, den_floor, out, n);
}

void directional_relu(const double* gx, const double* gy, double c, double s, double* out,
                      std::size_t n) {
  LVSEG_DISPATCH(directional_relu, gx, gy, c, s, out, n);
}

void gauss_fit_residual(const double* img, const double* c0, const double* c1,
                        const double* c2, const double* c3, double* out, std::size_t n) {
  LVSEG_DISPATCH(gauss_fit_residual, img, c0, c1, c2, c3, out, n);
}

double sum(const double* a, std::size_t n) { LVSEG_DISPATCH(sum, a, n); }

double dot(const double* a, const double* b, std::size_t n) { LVSEG_DISPATCH(dot, a, b, n); }

void min_max(const double* a, std::size_t n, double& lo, double& hi) {
  LVSEG_DISPATCH(min_max, a, n, lo, hi);
}

#undef LVSEG_DISPATCH

}  // namespace lvseg::kernels
