#include "lvseg/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "lvseg/errors.hpp"
#include "lvseg/rng.hpp"

namespace lvseg {

namespace {

std::array<int, 3> class_counts(const PhantomSpec& s) {
  const double fr[3] = {s.basal_fraction, s.mid_fraction, s.apical_fraction};
  std::array<int, 3> counts{};
  std::array<double, 3> frac{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double t = fr[i] * s.n_slices;
    counts[i] = static_cast<int>(t);
    frac[i] = t - counts[i];
    assigned += counts[i];
  }
  // largest-remainder distribution of the leftover slices
  while (assigned < s.n_slices) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (frac[i] > frac[best]) best = i;
    ++counts[best];
    frac[best] = -1.0;
    ++assigned;
  }
  return counts;
}

double lerp(double a, double b, double t) { return a + (b - a) * t; }

}  // namespace

PhantomStudy generate_phantom_study(const PhantomSpec& spec) {
  const double frac_sum = spec.basal_fraction + spec.mid_fraction + spec.apical_fraction;
  if (spec.basal_fraction < 0 || spec.mid_fraction < 0 || spec.apical_fraction < 0 ||
      std::abs(frac_sum - 1.0) > 1e-9)
    throw InvalidSpec("class fractions must be nonnegative and sum to 1");
  if (spec.n_slices < 3) throw InvalidSpec("need at least 3 slices");
  if (spec.noise_sigma < 0) throw InvalidSpec("noise_sigma must be >= 0");
  if (spec.rows < 64 || spec.cols < 64 || spec.rows > 1024 || spec.cols > 1024)
    throw InvalidSpec("image size must be within [64, 1024] per side");

  Rng rng(spec.seed);
  const auto counts = class_counts(spec);

  PhantomStudy study;
  study.volume.case_id = "phantom_" + std::to_string(spec.seed);
  study.volume.rows = spec.rows;
  study.volume.cols = spec.cols;
  study.volume.n_slices = spec.n_slices;
  study.volume.voxels.resize(static_cast<std::size_t>(spec.rows) * spec.cols * spec.n_slices);

  double cr = spec.rows / 2.0 + (rng.uniform() * 4.0 - 2.0);
  double cc = spec.cols / 2.0 + (rng.uniform() * 4.0 - 2.0);

  int slice = 0;
  for (int cls_idx = 0; cls_idx < 3; ++cls_idx) {
    const SliceClass cls = static_cast<SliceClass>(cls_idx);
    for (int j = 0; j < counts[cls_idx]; ++j, ++slice) {
      const double t = counts[cls_idx] > 1 ? static_cast<double>(j) / (counts[cls_idx] - 1) : 0.0;
      study.classes.push_back(cls);

      // cavity geometry per class, tapering toward the apex
      double ax_r, ax_c, ring;
      switch (cls) {
        case SliceClass::Basal:
          ax_c = lerp(24.0, 21.0, t);
          ax_r = ax_c / 1.4;
          ring = 6.0;
          break;
        case SliceClass::MidVentricle:
          ax_r = ax_c = lerp(18.0, 15.0, t);
          ring = 8.0;
          break;
        default:
          ax_r = ax_c = lerp(5.5, 4.5, t);
          ring = 4.0;
          break;
      }

      // papillary notch for mid slices: dark disc touching the cavity wall
      double notch_r = 0.0, notch_cr = 0.0, notch_cc = 0.0;
      if (cls == SliceClass::MidVentricle) {
        notch_r = 2.0 + rng.uniform() * 2.0;
        const double ang = rng.uniform() * 2.0 * M_PI;
        const double d = ax_r - notch_r;
        notch_cr = cr + d * std::sin(ang);
        notch_cc = cc + d * std::cos(ang);
      }

      GroundTruthMask gt;
      gt.p = slice + 1;
      gt.n = spec.n_slices;
      gt.case_id = study.volume.case_id;
      gt.pixels = Mask(spec.rows, spec.cols);

      for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
          const double dr = r - cr, dc = c - cc;
          const double e_in = (dr / ax_r) * (dr / ax_r) + (dc / ax_c) * (dc / ax_c);
          const double e_out = (dr / (ax_r + ring)) * (dr / (ax_r + ring)) +
                               (dc / (ax_c + ring)) * (dc / (ax_c + ring));
          double base;
          bool cavity = e_in <= 1.0;
          if (cavity) {
            base = spec.cavity_intensity;
            if (notch_r > 0.0) {
              const double nr = r - notch_cr, nc = c - notch_cc;
              if (nr * nr + nc * nc <= notch_r * notch_r) base = spec.myocardium_intensity;
            }
          } else if (e_out <= 1.0) {
            base = spec.myocardium_intensity;
          } else {
            base = spec.background_intensity;
          }
          gt.pixels(r, c) = cavity ? 1 : 0;

          double v = base;
          if (spec.noise_sigma > 0) v += spec.noise_sigma * rng.normal();
          v = std::clamp(v, 0.0, 255.0);
          // snap to float32 so NIfTI float output round-trips bit-exactly
          study.volume.voxel(r, c, slice) = static_cast<double>(static_cast<float>(v));
        }
      }
      study.ground_truth.push_back(std::move(gt));

      // small centroid walk between consecutive slices (well under 3 px)
      cr += rng.uniform() * 2.0 - 1.0;
      cc += rng.uniform() * 2.0 - 1.0;
    }
  }
  return study;
}

}  // namespace lvseg
