#ifndef LVSEG_LGDACM_HPP
#define LVSEG_LGDACM_HPP

#include <utility>
#include <vector>

#include "lvseg/grid.hpp"
#include "lvseg/slice_class.hpp"
#include "lvseg/volume_io.hpp"

namespace lvseg {

/// Level-set function over the slice grid; the contour is the zero crossing.
using LevelSetField = Image;

struct LgdParams {
  double tau = 0.05;          // explicit-Euler timestep
  double lambda1 = 3.0;       // inside data-term weight
  double lambda2 = 2.0;       // outside data-term weight
  double nu = 0.0008 * 255.0 * 255.0;  // length-term weight
  double mu = 1.0;            // distance-regularization weight
  double epsilon = 1.0;       // Heaviside regularization width
  double kernel_sigma = 3.0;  // local-window Gaussian std (px)
  double sigma_floor = 1e-4 * 255.0 * 255.0;  // minimum local variance
  int iterations = 150;       // used when adaptive_iterations is off
  bool adaptive_iterations = false;
  double iter_gain = 4.0;     // adaptive rule: round(gain * local std)
  int iter_min = 20;
  int iter_max = 300;
  double init_height = 2.0;   // binary-step level-set initialization

  void validate() const;
};

/// The three per-class parameter sets (A = basal, B = mid, C = apical).
struct ParameterRegistry {
  LgdParams basal;
  LgdParams mid;
  LgdParams apical;

  static ParameterRegistry defaults();
  const LgdParams& for_class(SliceClass cls) const;
  LgdParams& for_class(SliceClass cls);
  /// Registry applying one class's set to every slice (ablation rows).
  ParameterRegistry uniform(SliceClass which) const;
};

const LgdParams& params_for(SliceClass cls, const ParameterRegistry& registry);

struct LocalGaussianStats {
  Image u1, u2;      // local means inside / outside
  Image var1, var2;  // local variances, clamped at sigma_floor
};

struct SegmentationResult {
  Mask mask;
  int iterations_run = 0;
  double initial_energy = 0;
  double final_energy = 0;
  bool hull_applied = false;
};

double heaviside_eps(double z, double eps);
double dirac_eps(double z, double eps);

/// phi = +c inside the seed, -c outside.
LevelSetField init_level_set(const Mask& seed, double c);

LocalGaussianStats local_gaussian_stats(const Image& img, const LevelSetField& phi,
                                        const LgdParams& p);

double lgd_energy(const Image& img, const LevelSetField& phi, const LgdParams& p);

/// Pointwise data-term fields e1/e2 (convolution-expanded); exposed so the
/// expansion can be checked against its double-sum definition.
struct LgdResiduals {
  Image e1, e2;
};
LgdResiduals lgd_residuals(const Image& img, const LevelSetField& phi, const LgdParams& p);

/// `iters` explicit-Euler steps with local statistics refreshed every
/// iteration; replicate boundary conditions on the finite differences.
/// Throws NonFiniteField if the field diverges.
LevelSetField evolve_level_set(const Image& img, const LevelSetField& phi0, const LgdParams& p,
                               int iters);

struct EvolveTrace {
  LevelSetField phi;
  std::vector<double> energies;  // energies[k] = energy after k steps, size iters+1
};
EvolveTrace evolve_level_set_traced(const Image& img, const LevelSetField& phi0,
                                    const LgdParams& p, int iters);

/// Adaptive mid-ventricle rule: std-dev of intensities inside a 10-px disc at
/// the seed centroid, scaled and clamped.
int mid_iteration_count(const Image& img, std::pair<double, double> seed_centroid,
                        const LgdParams& p);

/// Pixels whose centers lie inside or on the convex hull of the foreground
/// pixel centers (exact integer predicate).
Mask convex_hull_fill(const Mask& m);

/// div(grad phi / |grad phi|), central differences, exposed for verification.
Image curvature(const LevelSetField& phi);

/// Class-routed solve: parameter set, iteration policy, threshold at phi > 0,
/// largest 8-connected component, convex-hull fill for mid slices.
SegmentationResult segment_slice(const SliceImage& s, const Mask& seed, SliceClass cls,
                                 const ParameterRegistry& registry);

}  // namespace lvseg

#endif
