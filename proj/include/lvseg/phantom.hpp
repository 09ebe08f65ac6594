#ifndef LVSEG_PHANTOM_HPP
#define LVSEG_PHANTOM_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "lvseg/slice_class.hpp"
#include "lvseg/volume_io.hpp"

namespace lvseg {

/// Synthetic short-axis study description. Geometry is tuned for ~200x200
/// grids: basal slices carry a bright ellipse (axis ratio ~1.4) inside a dark
/// ring, mid slices a bright disc with a dark ring and one dark papillary
/// notch just inside the cavity wall, apical slices a small bright disc
/// (< 120 px). Ground truth is the geometric cavity; for mid slices it
/// includes the notch, so it is convex.
struct PhantomSpec {
  int n_slices = 8;
  int rows = 200;
  int cols = 200;
  double noise_sigma = 8.0;
  double basal_fraction = 0.3;
  double mid_fraction = 0.4;
  double apical_fraction = 0.3;
  double cavity_intensity = 200.0;
  double myocardium_intensity = 30.0;
  double background_intensity = 60.0;
  std::uint64_t seed = 1;
};

struct PhantomStudy {
  CmrVolume volume;
  std::vector<GroundTruthMask> ground_truth;
  std::vector<SliceClass> classes;
};

/// Deterministic for a fixed spec (voxels are snapped to float32 precision so
/// NIfTI round trips are exact). Throws InvalidSpec on invariant violations.
PhantomStudy generate_phantom_study(const PhantomSpec& spec);

}  // namespace lvseg

#endif
