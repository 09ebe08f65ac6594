#ifndef LVSEG_METRICS_HPP
#define LVSEG_METRICS_HPP

#include <utility>
#include <vector>

#include "lvseg/grid.hpp"

namespace lvseg {

struct ConfusionMetrics {
  double precision = 0, recall = 0, f1 = 0, accuracy = 0, specificity = 0, mae = 0;
};

struct BoundaryDistances {
  double hausdorff = 0;
  double mad = 0;  // average symmetric surface distance
  double bde = 0;  // one-directional, predicted -> truth
};

/// Full per-slice evaluation row. Distance fields are NaN when either mask is
/// empty (overlap metrics fall back to the 1.0/0.0 empty-mask conventions).
struct MetricReport {
  double dice = 0, jaccard = 0;
  double precision = 0, recall = 0, f1 = 0, accuracy = 0, specificity = 0, mae = 0;
  double hausdorff = 0, mad = 0, bde = 0;
  bool has_distances = false;
};

double dice(const Mask& a, const Mask& b);
double jaccard(const Mask& a, const Mask& b);
ConfusionMetrics confusion_metrics(const Mask& predicted, const Mask& truth);

/// Foreground pixels with a 4-neighbour background or image-border contact,
/// in row-major order. Throws EmptyMask.
std::vector<std::pair<int, int>> extract_boundary(const Mask& m);

BoundaryDistances boundary_distances(const Mask& a, const Mask& b);

MetricReport evaluate_masks(const Mask& predicted, const Mask& truth);

/// Exact squared Euclidean distance transform: out(r,c) = min over seed pixels
/// of the squared distance. Seeds nonempty.
Image squared_edt(const Mask& seeds);

/// Precomputed per-mask boundary data so study-scale sweeps can reuse the
/// distance fields; boundary_distances(a, b) is the same computation.
struct BoundaryField {
  std::vector<std::pair<int, int>> boundary;
  Image sq_edt;  // distance to this mask's boundary
};
BoundaryField make_boundary_field(const Mask& m);
BoundaryDistances boundary_distances(const BoundaryField& a, const BoundaryField& b);

}  // namespace lvseg

#endif
