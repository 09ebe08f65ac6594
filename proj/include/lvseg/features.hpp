#ifndef LVSEG_FEATURES_HPP
#define LVSEG_FEATURES_HPP

#include <optional>
#include <string>
#include <vector>

#include "lvseg/slice_class.hpp"
#include "lvseg/volume_io.hpp"

namespace lvseg {

/// Dense DAISY sampling layout. Descriptor per keypoint: the orientation
/// histogram at the center (smoothed with the first ring's sigma) followed by
/// `histograms_per_ring` histograms on each concentric ring, ring q sampled
/// from the layers smoothed with gaussian_sigmas[q]. Each histogram is
/// L2-normalized, then the whole descriptor is L2-normalized.
struct DaisyConfig {
  int step = 25;
  int radius = 24;
  int rings = 3;
  int histograms_per_ring = 8;
  int orientations = 8;
  std::vector<double> gaussian_sigmas = {2.5, 5.0, 7.5};

  int descriptor_length() const {
    return (rings * histograms_per_ring + 1) * orientations;
  }
  /// Keypoint centers per axis for a size-pixel axis: radius, radius+step, ...
  /// <= size - radius - 1.
  int grid_count(int size) const {
    const int lo = radius, hi = size - radius - 1;
    return hi < lo ? 0 : (hi - lo) / step + 1;
  }
  int feature_length(int rows, int cols) const {
    return grid_count(rows) * grid_count(cols) * descriptor_length() + 1;
  }
  void validate() const;
};

struct FeatureVector {
  std::vector<double> values;  // keypoint descriptors row-major, IPI last
  std::optional<SliceClass> label;
  std::string case_id;
  int p = 1;
  int n = 1;
};

/// Slice-position feature: (n - p + 1) / n with 1-based p, so the first slice
/// of any stack maps to 1 and deeper slices decrease by 1/n.
double inverse_position_index(int p, int n);

/// Per-keypoint descriptors in row-major keypoint order.
std::vector<std::vector<double>> compute_daisy(const SliceImage& s, const DaisyConfig& cfg);

FeatureVector build_feature_vector(const SliceImage& s, const DaisyConfig& cfg);

void write_feature_csv(const std::string& path, const std::vector<FeatureVector>& rows);
std::vector<FeatureVector> read_feature_csv(const std::string& path);

}  // namespace lvseg

#endif
