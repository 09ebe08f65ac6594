#include "lvseg/lgdacm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "lvseg/errors.hpp"
#include "lvseg/kernels.hpp"
#include "lvseg/maskgen.hpp"

namespace lvseg {

namespace {

constexpr double kDenFloor = 1e-12;
constexpr double kGradFloor = 1e-10;

struct ConvKernel {
  std::vector<double> taps;
  int half = 0;
};

// truncated Gaussian, half-width ceil(4*sigma), normalized to sum 1; the 2-D
// window is the separable product of this 1-D kernel with itself
ConvKernel make_window(double sigma) {
  ConvKernel k;
  k.half = static_cast<int>(std::ceil(4.0 * sigma));
  k.taps.resize(2 * k.half + 1);
  double total = 0.0;
  for (int i = -k.half; i <= k.half; ++i) {
    const double w = std::exp(-0.5 * i * i / (sigma * sigma));
    k.taps[i + k.half] = w;
    total += w;
  }
  for (double& w : k.taps) w /= total;
  return k;
}

void conv2_zero(const Image& src, Image& dst, Image& tmp, const ConvKernel& k) {
  kernels::conv_rows(src.data(), tmp.data(), src.rows(), src.cols(), k.taps.data(), k.half,
                     kernels::Border::Zero);
  kernels::conv_cols(tmp.data(), dst.data(), src.rows(), src.cols(), k.taps.data(), k.half,
                     kernels::Border::Zero);
}

void gradient_replicate(const Image& f, Image& gx, Image& gy) {
  const int rows = f.rows(), cols = f.cols();
  for (int r = 0; r < rows; ++r) {
    const int ru = r > 0 ? r - 1 : 0, rd = r < rows - 1 ? r + 1 : rows - 1;
    for (int c = 0; c < cols; ++c) {
      const int cl = c > 0 ? c - 1 : 0, cr = c < cols - 1 ? c + 1 : cols - 1;
      gx(r, c) = (f(r, cr) - f(r, cl)) / 2.0;
      gy(r, c) = (f(rd, c) - f(ru, c)) / 2.0;
    }
  }
}

// One side of the data term: local mean/variance and the pointwise residual.
class LgdSolver {
 public:
  LgdSolver(const Image& img, const LgdParams& p)
      : img_(img),
        p_(p),
        window_(make_window(p.kernel_sigma)),
        rows_(img.rows()),
        cols_(img.cols()) {
    const auto shape = [&] { return Image(rows_, cols_); };
    tmp_ = shape();
    ones_ = Image(rows_, cols_, 1.0);
    img2_ = shape();
    kernels::multiply(img_.data(), img_.data(), img2_.data(), img_.size());
    k1_ = shape();
    ki_ = shape();
    ki2_ = shape();
    conv2_zero(ones_, k1_, tmp_, window_);
    conv2_zero(img_, ki_, tmp_, window_);
    conv2_zero(img2_, ki2_, tmp_, window_);
    H_ = shape();
    m2_ = shape();
    d1_ = shape();
    a1_ = shape();
    b1_ = shape();
    u1_ = shape();
    u2_ = shape();
    var1_ = shape();
    var2_ = shape();
    field_ = shape();
    conv_ = shape();
    cl_ = shape();
    cp_ = shape();
    cq_ = shape();
    cr_ = shape();
    e1_ = shape();
    e2_ = shape();
    force_ = shape();
    gx_ = shape();
    gy_ = shape();
    nx_ = shape();
    ny_ = shape();
    kappa_ = shape();
    lap_ = shape();
  }

  void compute_stats(const Image& phi) {
    const std::size_t n = phi.size();
    for (std::size_t i = 0; i < n; ++i) {
      H_.data()[i] = heaviside_eps(phi.data()[i], p_.epsilon);
      m2_.data()[i] = 1.0 - H_.data()[i];
    }
    conv2_zero(H_, d1_, tmp_, window_);
    kernels::multiply(img_.data(), H_.data(), field_.data(), n);
    conv2_zero(field_, a1_, tmp_, window_);
    kernels::multiply(img2_.data(), H_.data(), field_.data(), n);
    conv2_zero(field_, b1_, tmp_, window_);

    side_stats(a1_.data(), b1_.data(), d1_.data(), u1_, var1_, n);
    // outside fields by linearity: omega*(1) - omega*(M1) etc.
    for (std::size_t i = 0; i < n; ++i) {
      const double d2 = k1_.data()[i] - d1_.data()[i];
      const double a2 = ki_.data()[i] - a1_.data()[i];
      const double b2 = ki2_.data()[i] - b1_.data()[i];
      const double u = a2 / std::max(d2, kDenFloor);
      const double r2 = b2 / std::max(d2, kDenFloor);
      u2_.data()[i] = u;
      var2_.data()[i] = std::max(r2 - 2.0 * u * u + u * u, p_.sigma_floor);
    }
  }

  void compute_residuals() {
    side_residual(u1_, var1_, e1_);
    side_residual(u2_, var2_, e2_);
  }

  // data force lambda1*e1 - lambda2*e2 assembled from lambda-combined
  // coefficient fields: four convolutions instead of eight by linearity
  void compute_force() {
    const std::size_t n = img_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double v1 = var1_.data()[i], v2 = var2_.data()[i];
      const double p1 = 1.0 / (2.0 * v1), p2 = 1.0 / (2.0 * v2);
      const double w1 = u1_.data()[i], w2 = u2_.data()[i];
      field_.data()[i] = p_.lambda1 * 0.5 * std::log(2.0 * M_PI * v1) -
                         p_.lambda2 * 0.5 * std::log(2.0 * M_PI * v2);
      tmp_.data()[i] = p_.lambda1 * p1 - p_.lambda2 * p2;
      gx_.data()[i] = p_.lambda1 * w1 * p1 - p_.lambda2 * w2 * p2;
      gy_.data()[i] = p_.lambda1 * w1 * w1 * p1 - p_.lambda2 * w2 * w2 * p2;
    }
    conv2_zero(field_, cl_, conv_, window_);
    conv2_zero(tmp_, cp_, conv_, window_);
    conv2_zero(gx_, cq_, conv_, window_);
    conv2_zero(gy_, cr_, conv_, window_);
    kernels::gauss_fit_residual(img_.data(), cl_.data(), cp_.data(), cq_.data(), cr_.data(),
                                force_.data(), n);
  }

  double energy(const Image& phi) {
    const std::size_t n = phi.size();
    double e = p_.lambda1 * kernels::dot(e1_.data(), H_.data(), n) +
               p_.lambda2 * kernels::dot(e2_.data(), m2_.data(), n);
    gradient_replicate(H_, gx_, gy_);
    double len = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      len += std::sqrt(gx_.data()[i] * gx_.data()[i] + gy_.data()[i] * gy_.data()[i]);
    gradient_replicate(phi, gx_, gy_);
    double pen = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double mag =
          std::sqrt(gx_.data()[i] * gx_.data()[i] + gy_.data()[i] * gy_.data()[i]);
      pen += 0.5 * (mag - 1.0) * (mag - 1.0);
    }
    return e + p_.nu * len + p_.mu * pen;
  }

  void step(Image& phi) {
    curvature_into(phi, kappa_);
    laplacian_into(phi, lap_);
    const std::size_t n = phi.size();
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = phi.data()[i];
      const double d = dirac_eps(z, p_.epsilon);
      const double rate = -d * force_.data()[i] + p_.nu * d * kappa_.data()[i] +
                          p_.mu * (lap_.data()[i] - kappa_.data()[i]);
      const double next = z + p_.tau * rate;
      phi.data()[i] = next;
      finite = finite && std::isfinite(next);
    }
    if (!finite)
      throw NonFiniteField("level-set field diverged (timestep tau likely too large)");
  }

  void curvature_into(const Image& phi, Image& out) {
    gradient_replicate(phi, gx_, gy_);
    const std::size_t n = phi.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double gx = gx_.data()[i], gy = gy_.data()[i];
      const double mag = std::max(std::sqrt(gx * gx + gy * gy), kGradFloor);
      nx_.data()[i] = gx / mag;
      ny_.data()[i] = gy / mag;
    }
    const int rows = phi.rows(), cols = phi.cols();
    for (int r = 0; r < rows; ++r) {
      const int ru = r > 0 ? r - 1 : 0, rd = r < rows - 1 ? r + 1 : rows - 1;
      for (int c = 0; c < cols; ++c) {
        const int cl = c > 0 ? c - 1 : 0, cr = c < cols - 1 ? c + 1 : cols - 1;
        out(r, c) = (nx_(r, cr) - nx_(r, cl)) / 2.0 + (ny_(rd, c) - ny_(ru, c)) / 2.0;
      }
    }
  }

  void laplacian_into(const Image& phi, Image& out) {
    const int rows = phi.rows(), cols = phi.cols();
    for (int r = 0; r < rows; ++r) {
      const int ru = r > 0 ? r - 1 : 0, rd = r < rows - 1 ? r + 1 : rows - 1;
      for (int c = 0; c < cols; ++c) {
        const int cl = c > 0 ? c - 1 : 0, cr = c < cols - 1 ? c + 1 : cols - 1;
        out(r, c) = phi(rd, c) + phi(ru, c) + phi(r, cr) + phi(r, cl) - 4.0 * phi(r, c);
      }
    }
  }

  const Image& u1() const { return u1_; }
  const Image& u2() const { return u2_; }
  const Image& var1() const { return var1_; }
  const Image& var2() const { return var2_; }
  const Image& e1() const { return e1_; }
  const Image& e2() const { return e2_; }

 private:
  void side_stats(const double* a, const double* b, const double* d, Image& u, Image& var,
                  std::size_t n) {
    kernels::ratio_floor(a, d, kDenFloor, u.data(), n);
    kernels::ratio_floor(b, d, kDenFloor, var.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      const double ui = u.data()[i];
      var.data()[i] = std::max(var.data()[i] - 2.0 * ui * ui + ui * ui, p_.sigma_floor);
    }
  }

  void side_residual(const Image& u, const Image& var, Image& e) {
    const std::size_t n = u.size();
    // L = log sqrt(2 pi var), P = 1/(2 var), Q = u P, R = u^2 P
    for (std::size_t i = 0; i < n; ++i) {
      const double v = var.data()[i];
      const double p = 1.0 / (2.0 * v);
      const double ui = u.data()[i];
      field_.data()[i] = 0.5 * std::log(2.0 * M_PI * v);
      tmp_.data()[i] = p;
      gx_.data()[i] = ui * p;
      gy_.data()[i] = ui * ui * p;
    }
    conv2_zero(field_, cl_, conv_, window_);
    conv2_zero(tmp_, cp_, conv_, window_);
    conv2_zero(gx_, cq_, conv_, window_);
    conv2_zero(gy_, cr_, conv_, window_);
    kernels::gauss_fit_residual(img_.data(), cl_.data(), cp_.data(), cq_.data(), cr_.data(),
                                e.data(), n);
  }

  const Image& img_;
  LgdParams p_;
  ConvKernel window_;
  int rows_, cols_;
  Image tmp_, ones_, img2_, k1_, ki_, ki2_;
  Image H_, m2_, d1_, a1_, b1_;
  Image u1_, u2_, var1_, var2_;
  Image field_, conv_, cl_, cp_, cq_, cr_, e1_, e2_, force_;
  Image gx_, gy_, nx_, ny_, kappa_, lap_;
};

enum class TraceMode { None, Endpoints, All };

LevelSetField evolve_impl(const Image& img, const LevelSetField& phi0, const LgdParams& p,
                          int iters, TraceMode mode, std::vector<double>* energies) {
  p.validate();
  if (!img.same_shape(phi0)) throw ShapeMismatch("image and level set shapes differ");
  if (iters < 0) throw UsageError("negative iteration count");
  LevelSetField phi = phi0;
  if (iters == 0 && mode == TraceMode::None) return phi;

  LgdSolver solver(img, p);
  for (int it = 0; it < iters; ++it) {
    solver.compute_stats(phi);
    if (mode == TraceMode::All || (mode == TraceMode::Endpoints && it == 0)) {
      solver.compute_residuals();
      energies->push_back(solver.energy(phi));
    }
    solver.compute_force();
    solver.step(phi);
  }
  if (mode != TraceMode::None) {
    solver.compute_stats(phi);
    solver.compute_residuals();
    energies->push_back(solver.energy(phi));
  }
  return phi;
}

}  // namespace

void LgdParams::validate() const {
  if (!(tau > 0) || !(lambda1 > 0) || !(lambda2 > 0) || nu < 0 || mu < 0 || !(epsilon > 0) ||
      !(kernel_sigma > 0) || !(sigma_floor > 0) || !(init_height > 0) || iterations < 0 ||
      iter_min < 0 || iter_max < iter_min || !(iter_gain >= 0))
    throw UsageError("invalid LGD parameter set");
}

double heaviside_eps(double z, double eps) {
  return 0.5 * (1.0 + (2.0 / M_PI) * std::atan(z / eps));
}

double dirac_eps(double z, double eps) { return eps / (M_PI * (eps * eps + z * z)); }

ParameterRegistry ParameterRegistry::defaults() {
  ParameterRegistry reg;
  reg.basal.lambda1 = 3.0;
  reg.basal.lambda2 = 2.0;
  reg.basal.nu = 0.0008 * 255.0 * 255.0;
  reg.basal.iterations = 90;
  reg.basal.adaptive_iterations = false;

  reg.mid.lambda1 = 3.5;
  reg.mid.lambda2 = 2.5;
  reg.mid.nu = 0.0005 * 255.0 * 255.0;
  reg.mid.adaptive_iterations = true;
  reg.mid.iter_max = 60;  // calibrated cap; the local-std rule spikes when the
                          // papillary notch falls inside the sampling disc

  reg.apical.lambda1 = 1.75;
  reg.apical.lambda2 = 1.5;
  reg.apical.nu = 0.0005 * 255.0 * 255.0;
  reg.apical.iterations = 30;
  reg.apical.adaptive_iterations = false;
  return reg;
}

const LgdParams& ParameterRegistry::for_class(SliceClass cls) const {
  switch (cls) {
    case SliceClass::Basal:
      return basal;
    case SliceClass::MidVentricle:
      return mid;
    default:
      return apical;
  }
}

LgdParams& ParameterRegistry::for_class(SliceClass cls) {
  switch (cls) {
    case SliceClass::Basal:
      return basal;
    case SliceClass::MidVentricle:
      return mid;
    default:
      return apical;
  }
}

ParameterRegistry ParameterRegistry::uniform(SliceClass which) const {
  ParameterRegistry reg;
  reg.basal = reg.mid = reg.apical = for_class(which);
  return reg;
}

const LgdParams& params_for(SliceClass cls, const ParameterRegistry& registry) {
  return registry.for_class(cls);
}

LevelSetField init_level_set(const Mask& seed, double c) {
  if (!(c > 0)) throw UsageError("init height must be positive");
  if (mask_area(seed) == 0) throw EmptyMask("level-set seed is empty");
  LevelSetField phi(seed.rows(), seed.cols());
  for (std::size_t i = 0; i < seed.size(); ++i)
    phi.data()[i] = seed.data()[i] ? c : -c;
  return phi;
}

LocalGaussianStats local_gaussian_stats(const Image& img, const LevelSetField& phi,
                                        const LgdParams& p) {
  p.validate();
  if (!img.same_shape(phi)) throw ShapeMismatch("image and level set shapes differ");
  LgdSolver solver(img, p);
  solver.compute_stats(phi);
  return LocalGaussianStats{solver.u1(), solver.u2(), solver.var1(), solver.var2()};
}

double lgd_energy(const Image& img, const LevelSetField& phi, const LgdParams& p) {
  p.validate();
  if (!img.same_shape(phi)) throw ShapeMismatch("image and level set shapes differ");
  LgdSolver solver(img, p);
  solver.compute_stats(phi);
  solver.compute_residuals();
  return solver.energy(phi);
}

LgdResiduals lgd_residuals(const Image& img, const LevelSetField& phi, const LgdParams& p) {
  p.validate();
  if (!img.same_shape(phi)) throw ShapeMismatch("image and level set shapes differ");
  LgdSolver solver(img, p);
  solver.compute_stats(phi);
  solver.compute_residuals();
  return LgdResiduals{solver.e1(), solver.e2()};
}

LevelSetField evolve_level_set(const Image& img, const LevelSetField& phi0, const LgdParams& p,
                               int iters) {
  return evolve_impl(img, phi0, p, iters, TraceMode::None, nullptr);
}

EvolveTrace evolve_level_set_traced(const Image& img, const LevelSetField& phi0,
                                    const LgdParams& p, int iters) {
  EvolveTrace trace;
  trace.phi = evolve_impl(img, phi0, p, iters, TraceMode::All, &trace.energies);
  return trace;
}

int mid_iteration_count(const Image& img, std::pair<double, double> seed_centroid,
                        const LgdParams& p) {
  const double cr = seed_centroid.first, cc = seed_centroid.second;
  if (cr < 0 || cr > img.rows() - 1 || cc < 0 || cc > img.cols() - 1)
    throw OutOfRange("seed centroid outside the image");
  constexpr double kRadius = 10.0;
  const int r0 = std::max(0, static_cast<int>(std::floor(cr - kRadius)));
  const int r1 = std::min(img.rows() - 1, static_cast<int>(std::ceil(cr + kRadius)));
  const int c0 = std::max(0, static_cast<int>(std::floor(cc - kRadius)));
  const int c1 = std::min(img.cols() - 1, static_cast<int>(std::ceil(cc + kRadius)));
  double sum = 0.0;
  int count = 0;
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      const double dr = r - cr, dc = c - cc;
      if (dr * dr + dc * dc > kRadius * kRadius) continue;
      sum += img(r, c);
      ++count;
    }
  if (count == 0) return p.iter_min;
  const double mean = sum / count;
  double ss = 0.0;
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      const double dr = r - cr, dc = c - cc;
      if (dr * dr + dc * dc > kRadius * kRadius) continue;
      const double d = img(r, c) - mean;
      ss += d * d;
    }
  const double sigma = std::sqrt(ss / count);
  const int iters = static_cast<int>(std::lround(p.iter_gain * sigma));
  return std::clamp(iters, p.iter_min, p.iter_max);
}

namespace {

using HullPoint = std::pair<std::int64_t, std::int64_t>;  // (x=col, y=row)

std::int64_t cross(const HullPoint& o, const HullPoint& a, const HullPoint& b) {
  return (a.first - o.first) * (b.second - o.second) -
         (a.second - o.second) * (b.first - o.first);
}

// monotone chain, counter-clockwise, collinear points dropped
std::vector<HullPoint> convex_hull(std::vector<HullPoint> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const std::size_t n = pts.size();
  if (n <= 2) return pts;
  std::vector<HullPoint> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace

Mask convex_hull_fill(const Mask& m) {
  if (mask_area(m) == 0) throw EmptyMask("convex_hull_fill on empty mask");
  std::vector<HullPoint> pts;
  int r0 = m.rows(), r1 = -1, c0 = m.cols(), c1 = -1;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c)
      if (m(r, c)) {
        pts.push_back({c, r});
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
      }
  const auto hull = convex_hull(std::move(pts));

  Mask out(m.rows(), m.cols(), 0);
  if (hull.size() == 1) {
    out(static_cast<int>(hull[0].second), static_cast<int>(hull[0].first)) = 1;
    return out;
  }
  if (hull.size() == 2) {
    // degenerate hull: pixels whose centers lie exactly on the segment
    const HullPoint a = hull[0], b = hull[1];
    const std::int64_t dx = b.first - a.first, dy = b.second - a.second;
    const std::int64_t len2 = dx * dx + dy * dy;
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) {
        const std::int64_t px = c - a.first, py = r - a.second;
        const std::int64_t dot = px * dx + py * dy;
        if (px * dy - py * dx == 0 && dot >= 0 && dot <= len2) out(r, c) = 1;
      }
    return out;
  }

  // hull interior: AND of half-plane tests, evaluated incrementally per edge
  Grid<std::uint8_t> keep(r1 - r0 + 1, c1 - c0 + 1, 1);
  for (std::size_t e = 0; e < hull.size(); ++e) {
    const HullPoint a = hull[e], b = hull[(e + 1) % hull.size()];
    const std::int64_t ex = b.first - a.first, ey = b.second - a.second;
    for (int r = r0; r <= r1; ++r) {
      // f(c) = ex*(r - ay) - ey*(c - ax); interior-or-boundary has f >= 0
      std::int64_t f = ex * (r - a.second) - ey * (static_cast<std::int64_t>(c0) - a.first);
      auto* row = keep.row(r - r0);
      for (int c = c0; c <= c1; ++c, f -= ey)
        if (f < 0) row[c - c0] = 0;
    }
  }
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) out(r, c) = keep(r - r0, c - c0);
  return out;
}

Image curvature(const LevelSetField& phi) {
  Image gx(phi.rows(), phi.cols()), gy(phi.rows(), phi.cols());
  gradient_replicate(phi, gx, gy);
  Image nx(phi.rows(), phi.cols()), ny(phi.rows(), phi.cols());
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double mag =
        std::max(std::sqrt(gx.data()[i] * gx.data()[i] + gy.data()[i] * gy.data()[i]),
                 kGradFloor);
    nx.data()[i] = gx.data()[i] / mag;
    ny.data()[i] = gy.data()[i] / mag;
  }
  Image out(phi.rows(), phi.cols());
  const int rows = phi.rows(), cols = phi.cols();
  for (int r = 0; r < rows; ++r) {
    const int ru = r > 0 ? r - 1 : 0, rd = r < rows - 1 ? r + 1 : rows - 1;
    for (int c = 0; c < cols; ++c) {
      const int cl = c > 0 ? c - 1 : 0, cr = c < cols - 1 ? c + 1 : cols - 1;
      out(r, c) = (nx(r, cr) - nx(r, cl)) / 2.0 + (ny(rd, c) - ny(ru, c)) / 2.0;
    }
  }
  return out;
}

SegmentationResult segment_slice(const SliceImage& s, const Mask& seed, SliceClass cls,
                                 const ParameterRegistry& registry) {
  const LgdParams& p = registry.for_class(cls);
  p.validate();
  if (seed.rows() != s.pixels.rows() || seed.cols() != s.pixels.cols())
    throw ShapeMismatch("seed and slice shapes differ");
  const std::size_t seed_area = mask_area(seed);
  if (seed_area == 0) throw EmptyMask("segmentation seed is empty");

  int iters = p.iterations;
  if (p.adaptive_iterations) {
    double sr = 0, sc = 0;
    for (int r = 0; r < seed.rows(); ++r)
      for (int c = 0; c < seed.cols(); ++c)
        if (seed(r, c)) {
          sr += r;
          sc += c;
        }
    iters = mid_iteration_count(
        s.pixels, {sr / static_cast<double>(seed_area), sc / static_cast<double>(seed_area)}, p);
  }

  std::vector<double> energies;
  LevelSetField phi = init_level_set(seed, p.init_height);
  // The solve carries the ventricle on the negative side of the field: with
  // lambda1 > lambda2 the data-term imbalance then drives the front outward
  // from the shrunken seed until the wall contrast stops it. The field is
  // negated back afterwards, so the returned mask is the phi > 0 region.
  for (std::size_t i = 0; i < phi.size(); ++i) phi.data()[i] = -phi.data()[i];
  phi = evolve_impl(s.pixels, phi, p, iters, TraceMode::Endpoints, &energies);
  for (std::size_t i = 0; i < phi.size(); ++i) phi.data()[i] = -phi.data()[i];

  SegmentationResult result;
  result.iterations_run = iters;
  result.initial_energy = energies.front();
  result.final_energy = energies.back();

  Mask mask(phi.rows(), phi.cols(), 0);
  for (std::size_t i = 0; i < phi.size(); ++i)
    mask.data()[i] = phi.data()[i] > 0 ? 1 : 0;
  mask = largest_component(mask);
  if (cls == SliceClass::MidVentricle && mask_area(mask) > 0) {
    mask = convex_hull_fill(mask);
    result.hull_applied = true;
  }
  result.mask = std::move(mask);
  return result;
}

}  // namespace lvseg
