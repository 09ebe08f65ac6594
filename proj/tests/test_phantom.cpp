#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "lvseg/errors.hpp"
#include "lvseg/lgdacm.hpp"
#include "lvseg/phantom.hpp"

using namespace lvseg;

TEST_CASE("same seed twice gives byte-identical studies") {
  PhantomSpec spec;
  spec.seed = 7;
  const auto a = generate_phantom_study(spec);
  const auto b = generate_phantom_study(spec);
  CHECK(std::memcmp(a.volume.voxels.data(), b.volume.voxels.data(),
                    a.volume.voxels.size() * sizeof(double)) == 0);
  CHECK(a.classes == b.classes);
  for (std::size_t i = 0; i < a.ground_truth.size(); ++i)
    CHECK(a.ground_truth[i].pixels == b.ground_truth[i].pixels);
}

TEST_CASE("zero noise leaves cavity pixels at cavity_intensity away from the notch") {
  PhantomSpec spec;
  spec.noise_sigma = 0.0;
  spec.seed = 5;
  const auto study = generate_phantom_study(spec);
  for (int s = 0; s < spec.n_slices; ++s) {
    const auto& gt = study.ground_truth[s].pixels;
    for (int r = 0; r < spec.rows; ++r)
      for (int c = 0; c < spec.cols; ++c) {
        if (!gt(r, c)) continue;
        const double v = study.volume.voxel(r, c, s);
        const bool cavity_level = v == doctest::Approx(spec.cavity_intensity);
        const bool notch_level = v == doctest::Approx(spec.myocardium_intensity);
        CHECK((cavity_level || notch_level));
        if (study.classes[s] != SliceClass::MidVentricle) CHECK(cavity_level);
      }
  }
}

TEST_CASE("apical ground truth stays below 120 pixels") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 44ull}) {
    PhantomSpec spec;
    spec.seed = seed;
    spec.n_slices = 10;
    const auto study = generate_phantom_study(spec);
    for (int s = 0; s < spec.n_slices; ++s)
      if (study.classes[s] == SliceClass::Apical)
        CHECK(mask_area(study.ground_truth[s].pixels) < 120);
  }
}

TEST_CASE("classes are monotone basal -> mid -> apical and cover all slices") {
  PhantomSpec spec;
  spec.n_slices = 11;
  spec.seed = 9;
  const auto study = generate_phantom_study(spec);
  REQUIRE(study.classes.size() == 11);
  for (std::size_t i = 1; i < study.classes.size(); ++i)
    CHECK(static_cast<int>(study.classes[i]) >= static_cast<int>(study.classes[i - 1]));
  CHECK(study.classes.front() == SliceClass::Basal);
  CHECK(study.classes.back() == SliceClass::Apical);
}

TEST_CASE("consecutive ground-truth centroids drift at most 3 px") {
  PhantomSpec spec;
  spec.seed = 17;
  spec.n_slices = 12;
  const auto study = generate_phantom_study(spec);
  double pr = 0, pc = 0;
  for (int s = 0; s < spec.n_slices; ++s) {
    const auto& gt = study.ground_truth[s].pixels;
    double sr = 0, sc = 0;
    std::size_t area = mask_area(gt);
    REQUIRE(area > 0);
    for (int r = 0; r < gt.rows(); ++r)
      for (int c = 0; c < gt.cols(); ++c)
        if (gt(r, c)) {
          sr += r;
          sc += c;
        }
    sr /= area;
    sc /= area;
    if (s > 0) CHECK(std::hypot(sr - pr, sc - pc) <= 3.0);
    pr = sr;
    pc = sc;
  }
}

TEST_CASE("mid ground truth is convex (hull fill is a no-op)") {
  PhantomSpec spec;
  spec.seed = 23;
  const auto study = generate_phantom_study(spec);
  for (int s = 0; s < spec.n_slices; ++s) {
    if (study.classes[s] != SliceClass::MidVentricle) continue;
    const auto& gt = study.ground_truth[s].pixels;
    CHECK(convex_hull_fill(gt) == gt);
  }
}

TEST_CASE("invalid specs are rejected") {
  PhantomSpec bad;
  bad.n_slices = 2;
  CHECK_THROWS_AS(generate_phantom_study(bad), InvalidSpec);
  PhantomSpec fr;
  fr.basal_fraction = 0.5;
  fr.mid_fraction = 0.5;
  fr.apical_fraction = 0.5;
  CHECK_THROWS_AS(generate_phantom_study(fr), InvalidSpec);
  PhantomSpec noise;
  noise.noise_sigma = -1;
  CHECK_THROWS_AS(generate_phantom_study(noise), InvalidSpec);
}
