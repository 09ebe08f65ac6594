#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lvseg/errors.hpp"
#include "lvseg/lgdacm.hpp"
#include "lvseg/maskgen.hpp"
#include "lvseg/metrics.hpp"
#include "lvseg/phantom.hpp"
#include "lvseg/rng.hpp"
#include "oracles.hpp"

using namespace lvseg;

namespace {

Image random_image(Rng& rng, int rows, int cols, double lo, double hi) {
  Image img(rows, cols);
  for (std::size_t i = 0; i < img.size(); ++i)
    img.data()[i] = lo + rng.uniform() * (hi - lo);
  return img;
}

Mask random_mask(Rng& rng, int rows, int cols, double density) {
  Mask m(rows, cols, 0);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() < density ? 1 : 0;
  return m;
}

SliceImage slice_of(const Image& img) {
  SliceImage s;
  s.pixels = img;
  s.case_id = "t";
  return s;
}

}  // namespace

TEST_CASE("registry carries the three published parameter sets") {
  const auto reg = ParameterRegistry::defaults();
  const auto& a = params_for(SliceClass::Basal, reg);
  CHECK(a.tau == 0.05);
  CHECK(a.lambda1 == 3.0);
  CHECK(a.lambda2 == 2.0);
  CHECK(a.nu == doctest::Approx(0.0008 * 255 * 255));
  CHECK_FALSE(a.adaptive_iterations);
  CHECK(a.iterations == 90);

  const auto& b = params_for(SliceClass::MidVentricle, reg);
  CHECK(b.tau == 0.05);
  CHECK(b.lambda1 == 3.5);
  CHECK(b.lambda2 == 2.5);
  CHECK(b.nu == doctest::Approx(0.0005 * 255 * 255));
  CHECK(b.adaptive_iterations);

  const auto& c = params_for(SliceClass::Apical, reg);
  CHECK(c.lambda1 == 1.75);
  CHECK(c.lambda2 == 1.5);
  CHECK(c.nu == b.nu);
  CHECK(c.tau == b.tau);
  CHECK(c.mu == b.mu);
  CHECK(c.iterations == 30);

  const auto uni = reg.uniform(SliceClass::Apical);
  CHECK(uni.basal.lambda1 == 1.75);
  CHECK(uni.mid.lambda1 == 1.75);
}

TEST_CASE("init_level_set is a signed binary step") {
  Mask seed(4, 5, 0);
  seed(1, 2) = seed(2, 2) = 1;
  auto phi = init_level_set(seed, 2.0);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 5; ++c) {
      CHECK(std::abs(phi(r, c)) == 2.0);
      CHECK((phi(r, c) > 0) == (seed(r, c) != 0));
    }
  Mask full(3, 3, 1);
  auto all = init_level_set(full, 1.5);
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all.data()[i] == 1.5);
  CHECK_THROWS_AS(init_level_set(Mask(3, 3, 0), 2.0), EmptyMask);
}

TEST_CASE("regularized Heaviside and Dirac are consistent") {
  for (double eps : {0.5, 1.0, 2.0}) {
    for (double z = -10.0; z <= 10.0; z += 0.05) {
      const double h = 1e-4;
      const double fd =
          (heaviside_eps(z + h, eps) - heaviside_eps(z - h, eps)) / (2.0 * h);
      CHECK(std::abs(fd - dirac_eps(z, eps)) < 1e-6);
    }
    CHECK(heaviside_eps(0.0, eps) == doctest::Approx(0.5));
    CHECK(heaviside_eps(1e9, eps) == doctest::Approx(1.0));
    CHECK(heaviside_eps(-1e9, eps) == doctest::Approx(0.0));
  }
}

TEST_CASE("curvature of a radial field approximates 1/r") {
  const int n = 61;
  const double cx = 30.0, cy = 30.0;
  Image phi(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) phi(r, c) = std::sqrt((r - cy) * (r - cy) + (c - cx) * (c - cx));
  const Image k = curvature(phi);
  for (int r = 3; r < n - 3; ++r)
    for (int c = 3; c < n - 3; ++c) {
      const double rad = std::hypot(r - cy, c - cx);
      if (rad <= 5.0) continue;
      CHECK(std::abs(k(r, c) - 1.0 / rad) / (1.0 / rad) < 0.05);
    }
}

TEST_CASE("constant image collapses stats to the value and the variance floor") {
  LgdParams p;
  const double v = 93.0;
  Image img(20, 20, v);
  Rng rng(4);
  auto phi = init_level_set(random_mask(rng, 20, 20, 0.4), 2.0);
  auto stats = local_gaussian_stats(img, phi, p);
  for (std::size_t i = 0; i < img.size(); ++i) {
    CHECK(stats.u1.data()[i] == doctest::Approx(v).epsilon(1e-12));
    CHECK(stats.u2.data()[i] == doctest::Approx(v).epsilon(1e-12));
    CHECK(stats.var1.data()[i] == p.sigma_floor);
    CHECK(stats.var2.data()[i] == p.sigma_floor);
  }
}

TEST_CASE("two-region image recovers the per-region means deep inside") {
  LgdParams p;
  const int n = 64;
  const int split = 32;  // columns < split belong to region A
  const double a = 200.0, b = 50.0;
  Image img(n, n);
  Mask inside(n, n, 0);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const bool in = c < split;
      inside(r, c) = in;
      img(r, c) = in ? a : b;
    }
  auto phi = init_level_set(inside, 2.0);
  auto stats = local_gaussian_stats(img, phi, p);
  const int margin = static_cast<int>(4.0 * p.kernel_sigma + 1.0);  // window in one region
  int checked = 0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      if (c <= split - 1 - margin) {
        CHECK(std::abs(stats.u1(r, c) - a) < 1e-6);
        ++checked;
      }
      if (c >= split + margin) {
        CHECK(std::abs(stats.u2(r, c) - b) < 1e-6);
        ++checked;
      }
    }
  CHECK(checked > 0);
}

TEST_CASE("convolution-expanded stats match the direct double sums") {
  Rng rng(2025);
  LgdParams p;
  p.kernel_sigma = 1.5;
  for (int trial = 0; trial < 5; ++trial) {
    Image img = random_image(rng, 16, 16, 0.0, 255.0);
    Image phi(16, 16);
    for (std::size_t i = 0; i < phi.size(); ++i) phi.data()[i] = rng.uniform() * 8.0 - 4.0;
    auto fast = local_gaussian_stats(img, phi, p);
    auto slow = oracle::lgd_stats_bruteforce(img, phi, p);
    for (std::size_t i = 0; i < img.size(); ++i) {
      CHECK(fast.u1.data()[i] == doctest::Approx(slow.u1.data()[i]).epsilon(1e-8));
      CHECK(fast.u2.data()[i] == doctest::Approx(slow.u2.data()[i]).epsilon(1e-8));
      CHECK(std::abs(fast.var1.data()[i] - slow.var1.data()[i]) <
            1e-8 * std::max(1.0, slow.var1.data()[i]));
      CHECK(std::abs(fast.var2.data()[i] - slow.var2.data()[i]) <
            1e-8 * std::max(1.0, slow.var2.data()[i]));
    }
  }
}

TEST_CASE("convolution-expanded residuals match the direct double sums") {
  Rng rng(31337);
  LgdParams p;
  p.kernel_sigma = 1.5;
  Image img = random_image(rng, 16, 16, 0.0, 255.0);
  Image phi(16, 16);
  for (std::size_t i = 0; i < phi.size(); ++i) phi.data()[i] = rng.uniform() * 8.0 - 4.0;
  auto stats = local_gaussian_stats(img, phi, p);
  auto res = lgd_residuals(img, phi, p);
  Image slow1 = oracle::lgd_residual_bruteforce(img, stats.u1, stats.var1, p.kernel_sigma);
  Image slow2 = oracle::lgd_residual_bruteforce(img, stats.u2, stats.var2, p.kernel_sigma);
  for (std::size_t i = 0; i < img.size(); ++i) {
    CHECK(std::abs(res.e1.data()[i] - slow1.data()[i]) <
          1e-8 * std::max(1.0, std::abs(slow1.data()[i])));
    CHECK(std::abs(res.e2.data()[i] - slow2.data()[i]) <
          1e-8 * std::max(1.0, std::abs(slow2.data()[i])));
  }
}

TEST_CASE("energy closed form on a constant image with mu = nu = 0") {
  LgdParams p;
  p.mu = 0.0;
  p.nu = 0.0;
  p.kernel_sigma = 2.0;
  const double v = 120.0;
  const int n = 24;
  Image img(n, n, v);
  Rng rng(12);
  auto phi = init_level_set(random_mask(rng, n, n, 0.5), 2.0);

  // e_i(x) = log sqrt(2 pi sigma_floor) * (omega * 1)(x); data terms weight by H
  int half;
  const auto g = oracle::lgd_window_taps(p.kernel_sigma, half);
  const double log_term = std::log(std::sqrt(2.0 * M_PI * p.sigma_floor));
  double expected = 0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      double k1 = 0;
      for (int dr = -half; dr <= half; ++dr)
        for (int dc = -half; dc <= half; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= n || cc < 0 || cc >= n) continue;
          k1 += g[dr + half] * g[dc + half];
        }
      const double h = heaviside_eps(phi(r, c), p.epsilon);
      expected += p.lambda1 * log_term * k1 * h + p.lambda2 * log_term * k1 * (1.0 - h);
    }
  const double actual = lgd_energy(img, phi, p);
  CHECK(actual == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("constant-sign phi has zero length-term contribution") {
  LgdParams with_nu;
  with_nu.mu = 0.0;
  LgdParams no_nu = with_nu;
  no_nu.nu = 0.0;
  Rng rng(5);
  Image img = random_image(rng, 20, 20, 0.0, 255.0);
  Image phi(20, 20, 2.0);
  CHECK(std::abs(lgd_energy(img, phi, with_nu) - lgd_energy(img, phi, no_nu)) < 1e-9);
}

TEST_CASE("zero iterations return phi unchanged") {
  Rng rng(9);
  Image img = random_image(rng, 12, 12, 0.0, 255.0);
  Mask seed(12, 12, 0);
  seed(6, 6) = seed(6, 7) = seed(7, 6) = 1;
  auto phi0 = init_level_set(seed, 2.0);
  LgdParams p;
  auto phi = evolve_level_set(img, phi0, p, 0);
  CHECK(phi == phi0);
}

TEST_CASE("equal means, different variances: LGD separates the regions") {
  Rng rng(777);
  const int n = 96;
  const int radius = 28;
  Image img(n, n);
  Mask truth(n, n, 0);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const bool in = (r - 48) * (r - 48) + (c - 48) * (c - 48) <= radius * radius;
      truth(r, c) = in;
      img(r, c) = 120.0 + rng.normal() * (in ? 5.0 : 40.0);
    }
  // seed overlapping the true region, front within window reach of the edge
  Mask seed(n, n, 0);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if ((r - 50) * (r - 50) + (c - 50) * (c - 50) <= 26 * 26) seed(r, c) = 1;

  LgdParams p;
  p.lambda1 = 1.0;
  p.lambda2 = 1.0;
  // the variance contrast is a gentle force: no length penalty, a wider
  // window for stable variance estimates, and a sharper Heaviside so the
  // membership weights do not blur the two distributions together
  p.nu = 0.0;
  p.kernel_sigma = 4.0;
  p.epsilon = 0.5;
  auto phi = evolve_level_set(img, init_level_set(seed, 2.0), p, 300);
  Mask result(n, n, 0);
  for (std::size_t i = 0; i < phi.size(); ++i) result.data()[i] = phi.data()[i] > 0;
  result = largest_component(result);
  CHECK(dice(result, truth) >= 0.95);
}

TEST_CASE("threshold of the evolved field tolerates a small phi0 offset") {
  Rng rng(444);
  const int n = 64;
  Image img(n, n);
  Mask truth(n, n, 0);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const bool in = (r - 32) * (r - 32) + (c - 32) * (c - 32) <= 18 * 18;
      truth(r, c) = in;
      img(r, c) = (in ? 200.0 : 60.0) + rng.normal() * 4.0;
    }
  Mask seed(n, n, 0);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if ((r - 34) * (r - 34) + (c - 34) * (c - 34) <= 10 * 10) seed(r, c) = 1;
  LgdParams p;
  p.lambda1 = 1.0;
  p.lambda2 = 1.0;
  auto base = evolve_level_set(img, init_level_set(seed, 2.0), p, 120);
  auto phi0 = init_level_set(seed, 2.0);
  for (std::size_t i = 0; i < phi0.size(); ++i) phi0.data()[i] += 0.9;  // < c/2
  auto shifted = evolve_level_set(img, phi0, p, 120);
  Mask a(n, n, 0), b(n, n, 0);
  for (std::size_t i = 0; i < base.size(); ++i) {
    a.data()[i] = base.data()[i] > 0;
    b.data()[i] = shifted.data()[i] > 0;
  }
  CHECK(dice(largest_component(a), largest_component(b)) >= 0.99);
}

TEST_CASE("mid iteration count rule") {
  LgdParams p;
  // uniform disc: sigma 0 -> clamped to iter_min
  Image flat(64, 64, 140.0);
  CHECK(mid_iteration_count(flat, {32.0, 32.0}, p) == p.iter_min);

  // checkerboard +/- 50 inside the disc: sigma exactly 50 -> 200
  Image checker(64, 64, 0.0);
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) checker(r, c) = 120.0 + (((r + c) % 2) ? 50.0 : -50.0);
  CHECK(mid_iteration_count(checker, {32.0, 32.0}, p) == 200);

  // +/- 100 -> 400 clamps to 300
  Image loud(64, 64, 0.0);
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) loud(r, c) = 120.0 + (((r + c) % 2) ? 100.0 : -100.0);
  CHECK(mid_iteration_count(loud, {32.0, 32.0}, p) == 300);

  CHECK_THROWS_AS(mid_iteration_count(flat, {-5.0, 32.0}, p), OutOfRange);
}

TEST_CASE("convex hull fill: closed forms and oracle equivalence") {
  Mask rect(8, 8, 0);
  for (int r = 2; r <= 5; ++r)
    for (int c = 1; c <= 6; ++c) rect(r, c) = 1;
  CHECK(convex_hull_fill(rect) == rect);

  Mask single(5, 5, 0);
  single(2, 3) = 1;
  CHECK(convex_hull_fill(single) == single);

  Mask cshape(7, 7, 0);
  for (int r = 1; r <= 5; ++r) cshape(r, 1) = 1;
  for (int c = 1; c <= 5; ++c) cshape(1, c) = cshape(5, c) = 1;
  auto filled = convex_hull_fill(cshape);
  CHECK(filled == oracle::convex_hull_fill_bruteforce(cshape));
  CHECK(mask_area(filled) == 25);

  CHECK_THROWS_AS(convex_hull_fill(Mask(4, 4, 0)), EmptyMask);

  Rng rng(606);
  for (int trial = 0; trial < 200; ++trial) {
    const int rows = 2 + static_cast<int>(rng.below(11));
    const int cols = 2 + static_cast<int>(rng.below(11));
    Mask m = random_mask(rng, rows, cols, 0.2);
    if (mask_area(m) == 0) m(rng.below(rows), rng.below(cols)) = 1;
    const Mask fast = convex_hull_fill(m);
    CHECK(fast == oracle::convex_hull_fill_bruteforce(m));
    // extensive and idempotent
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m.data()[i]) CHECK(fast.data()[i]);
    CHECK(convex_hull_fill(fast) == fast);
  }
}

TEST_CASE("segment_slice routes by class on phantom slices") {
  PhantomSpec spec;
  spec.seed = 99;
  spec.n_slices = 8;
  const auto study = generate_phantom_study(spec);
  const auto slices = extract_slices(study.volume);
  const auto reg = ParameterRegistry::defaults();

  int mid_index = -1, apical_index = -1;
  for (int s = 0; s < spec.n_slices; ++s) {
    if (study.classes[s] == SliceClass::MidVentricle && mid_index < 0) mid_index = s;
    if (study.classes[s] == SliceClass::Apical && apical_index < 0) apical_index = s;
  }
  REQUIRE(mid_index >= 0);
  REQUIRE(apical_index >= 0);

  // mid: hull applied, adaptive iterations, strong overlap with the convex GT
  {
    auto sel = select_lv_mask(slices[mid_index], std::nullopt);
    REQUIRE(sel.has_value());
    Mask seed = shrink_mask(sel->mask, SliceClass::MidVentricle);
    auto result = segment_slice(slices[mid_index], seed, SliceClass::MidVentricle, reg);
    CHECK(result.hull_applied);
    CHECK(result.iterations_run >= reg.mid.iter_min);
    CHECK(result.iterations_run <= reg.mid.iter_max);
    CHECK(result.final_energy < result.initial_energy);
    CHECK(dice(result.mask, study.ground_truth[mid_index].pixels) >= 0.92);
    CHECK(convex_hull_fill(result.mask) == result.mask);
  }

  // apical: fixed 30 iterations, no hull
  {
    auto sel = select_lv_mask(slices[apical_index], std::nullopt);
    REQUIRE(sel.has_value());
    Mask seed = shrink_mask(sel->mask, SliceClass::Apical);
    auto result = segment_slice(slices[apical_index], seed, SliceClass::Apical, reg);
    CHECK_FALSE(result.hull_applied);
    CHECK(result.iterations_run == 30);
    CHECK(dice(result.mask, study.ground_truth[apical_index].pixels) >= 0.80);
  }
}

TEST_CASE("the explicit-Euler flow descends the energy it discretizes") {
  PhantomSpec spec;
  spec.seed = 55;
  const auto study = generate_phantom_study(spec);
  const auto slices = extract_slices(study.volume);
  REQUIRE(study.classes[0] == SliceClass::Basal);
  auto sel = select_lv_mask(slices[0], std::nullopt);
  REQUIRE(sel.has_value());
  Mask seed = shrink_mask(sel->mask, SliceClass::Basal);
  const auto reg = ParameterRegistry::defaults();
  auto trace =
      evolve_level_set_traced(slices[0].pixels, init_level_set(seed, 2.0), reg.basal, 150);
  REQUIRE(trace.energies.size() == 151);
  CHECK(trace.energies.back() < trace.energies.front());
  int non_increasing = 0;
  for (std::size_t i = 1; i < trace.energies.size(); ++i)
    if (trace.energies[i] <= trace.energies[i - 1]) ++non_increasing;
  CHECK(non_increasing >= static_cast<int>(0.95 * (trace.energies.size() - 1)));
}
