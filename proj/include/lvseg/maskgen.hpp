#ifndef LVSEG_MASKGEN_HPP
#define LVSEG_MASKGEN_HPP

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "lvseg/grid.hpp"
#include "lvseg/slice_class.hpp"
#include "lvseg/volume_io.hpp"

namespace lvseg {

struct RegionProps {
  int area = 0;
  double centroid_r = 0, centroid_c = 0;
  int perimeter = 0;  // 4-neighbour edge crossings, image border included
  double circularity = 0;   // 4*pi*A / P^2
  double eccentricity = 0;  // from second central moments (+1/12 pixel extent)
  int bbox_r0 = 0, bbox_c0 = 0, bbox_r1 = 0, bbox_c1 = 0;  // inclusive
};

/// Knobs of the seed-mask search. Defaults operationalize the brightness
/// retry, the quantile threshold sweep, and the centrality/circularity/
/// sequential-consistency scoring.
struct MaskGenConfig {
  std::vector<double> beta_schedule = {0, 10, 20, 30, 40};
  std::vector<double> threshold_quantiles = {0.80, 0.85, 0.90, 0.95};
  int area_min = 30;
  int area_max = 4000;
  double w_circularity = 1.0;
  double w_center = 2.0;
  double w_prev = 3.0;
  double max_pair_distance = 20.0;  // px gate for the first-three-slice triple
  int beam = 5;                     // candidates per slice in the triple search
  double shrink_target_basal = 0.5;
  double shrink_target_mid = 0.7;  // calibrated: mid seeds keep more area so
                                   // the adaptive iteration budget recovers the wall
  int apical_area_limit = 120;
};

/// Brightness normalization: out = clamp(s * alpha + beta, 0, 255) with
/// alpha = 100 / (2 * mean(s)); the pre-clamp mean is exactly 50 + beta.
SliceImage adjust_intensity(const SliceImage& s, double beta);

/// 8-connected component properties in label-scan order. Throws EmptyMask.
std::vector<RegionProps> region_properties(const Mask& m);

struct MaskSelection {
  Mask mask;
  RegionProps props;
  double score = 0;
};

/// Seed-mask search over (beta, threshold quantile) with area gating and
/// prior scoring; nullopt when nothing passes the gate (undetected LV).
std::optional<MaskSelection> select_lv_mask(const SliceImage& s,
                                            std::optional<std::pair<double, double>> prev_centroid,
                                            const MaskGenConfig& cfg = {});

struct SeedTriple {
  std::array<std::optional<MaskSelection>, 3> masks;
  bool consistent = false;  // false = fell back to independent selection
};

/// Joint selection over the first three slices: minimize the summed pairwise
/// centroid distance over the per-slice candidate beams, every pair within
/// max_pair_distance.
SeedTriple sequential_seed_masks(const std::vector<SliceImage>& first_slices,
                                 const MaskGenConfig& cfg = {});

/// Iterative 3x3 erosion. Basal/mid stop at the class's area fraction; apical
/// masks below apical_area_limit px are returned untouched and larger ones
/// stop as soon as they drop below it. Never empties the mask.
Mask shrink_mask(const Mask& m, SliceClass cls, const MaskGenConfig& cfg = {});

/// One 3x3 full-structuring-element erosion pass.
Mask erode3x3(const Mask& m);

/// Largest 8-connected component (ties keep the first in scan order).
/// Returns an empty-shaped mask unchanged if there is no foreground.
Mask largest_component(const Mask& m);

}  // namespace lvseg

#endif
