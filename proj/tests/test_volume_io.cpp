#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "lvseg/errors.hpp"
#include "lvseg/metrics.hpp"
#include "lvseg/phantom.hpp"
#include "lvseg/volume_io.hpp"

using namespace lvseg;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / "lvseg_io_test";
  fs::create_directories(dir);
  return dir;
}

// minimal NIfTI-1: 4x4x2 int16 ramp, built byte by byte
std::vector<std::uint8_t> minimal_nifti_bytes() {
  std::vector<std::uint8_t> b(352 + 4 * 4 * 2 * 2, 0);
  auto put16 = [&](std::size_t off, std::int16_t v) { std::memcpy(b.data() + off, &v, 2); };
  auto put32i = [&](std::size_t off, std::int32_t v) { std::memcpy(b.data() + off, &v, 4); };
  auto put32f = [&](std::size_t off, float v) { std::memcpy(b.data() + off, &v, 4); };
  put32i(0, 348);
  put16(40, 3);  // dim[0]
  put16(42, 4);  // nx
  put16(44, 4);  // ny
  put16(46, 2);  // nz
  put16(48, 1);
  put16(50, 1);
  put16(52, 1);
  put16(54, 1);
  put16(70, 4);   // datatype int16
  put16(72, 16);  // bitpix
  put32f(108, 352.0f);
  std::memcpy(b.data() + 344, "n+1\0", 4);
  std::int16_t v = 0;
  for (std::size_t i = 0; i < 32; ++i, ++v) std::memcpy(b.data() + 352 + 2 * i, &v, 2);
  return b;
}
}  // namespace

TEST_CASE("minimal NIfTI file loads with expected dims and values") {
  const auto dir = temp_dir();
  const auto path = (dir / "mini.nii").string();
  const auto bytes = minimal_nifti_bytes();
  std::ofstream(path, std::ios::binary)
      .write(reinterpret_cast<const char*>(bytes.data()), bytes.size());

  CmrVolume v = load_volume(path);
  CHECK(v.rows == 4);
  CHECK(v.cols == 4);
  CHECK(v.n_slices == 2);
  CHECK(v.case_id == "mini");
  // x fastest: voxel(r=0, c=1, s=0) is linear index 1
  CHECK(v.voxel(0, 1, 0) == 1.0);
  CHECK(v.voxel(1, 0, 0) == 4.0);
  CHECK(v.voxel(0, 0, 1) == 16.0);
}

TEST_CASE("byte-swapped NIfTI is detected via dim[0]") {
  auto bytes = minimal_nifti_bytes();
  // swap every header field we set plus the voxel data
  auto swap16 = [&](std::size_t off) { std::swap(bytes[off], bytes[off + 1]); };
  auto swap32 = [&](std::size_t off) {
    std::swap(bytes[off], bytes[off + 3]);
    std::swap(bytes[off + 1], bytes[off + 2]);
  };
  swap32(0);
  for (std::size_t off = 40; off < 56; off += 2) swap16(off);
  swap16(70);
  swap16(72);
  swap32(108);
  for (std::size_t i = 0; i < 32; ++i) swap16(352 + 2 * i);

  const auto path = (temp_dir() / "swapped.nii").string();
  std::ofstream(path, std::ios::binary)
      .write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  CmrVolume v = load_volume(path);
  CHECK(v.voxel(0, 1, 0) == 1.0);
  CHECK(v.voxel(0, 0, 1) == 16.0);
}

TEST_CASE("bad magic raises MalformedHeader") {
  auto bytes = minimal_nifti_bytes();
  std::memcpy(bytes.data() + 344, "ni1\0", 4);
  const auto path = (temp_dir() / "badmagic.nii").string();
  std::ofstream(path, std::ios::binary)
      .write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  CHECK_THROWS_AS(load_volume(path), MalformedHeader);
}

TEST_CASE("unsupported datatype raises") {
  auto bytes = minimal_nifti_bytes();
  const std::int16_t dt = 64;  // float64: outside the supported set
  std::memcpy(bytes.data() + 70, &dt, 2);
  const auto path = (temp_dir() / "baddt.nii").string();
  std::ofstream(path, std::ios::binary)
      .write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  CHECK_THROWS_AS(load_volume(path), UnsupportedDataType);
}

TEST_CASE("phantom -> NIfTI -> load round trip is bit exact, including gz") {
  PhantomSpec spec;
  spec.n_slices = 4;
  spec.rows = 64;
  spec.cols = 64;
  spec.seed = 11;
  const auto study = generate_phantom_study(spec);
  for (const char* name : {"trip.nii", "trip.nii.gz"}) {
    const auto path = (temp_dir() / name).string();
    write_volume_nifti(study.volume, path);
    CmrVolume back = load_volume(path);
    REQUIRE(back.voxels.size() == study.volume.voxels.size());
    CHECK(std::memcmp(back.voxels.data(), study.volume.voxels.data(),
                      back.voxels.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("slice-directory round trip: quantized 16-bit values match exactly") {
  PhantomSpec spec;
  spec.n_slices = 3;
  spec.rows = 64;
  spec.cols = 64;
  spec.seed = 3;
  const auto study = generate_phantom_study(spec);
  const auto dir = (temp_dir() / "dircase").string();
  write_slice_directory(study.volume, study.ground_truth, study.classes, dir);

  CmrVolume back = load_volume(dir);
  CHECK(back.n_slices == 3);
  CHECK(back.case_id == study.volume.case_id);
  for (int s = 0; s < 3; ++s)
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c) {
        const double expected = std::lround(study.volume.voxel(r, c, s) * 257.0);
        REQUIRE(back.voxel(r, c, s) == expected);
      }

  auto classes = load_manifest_classes(dir);
  REQUIRE(classes.has_value());
  CHECK(*classes == study.classes);

  auto gt = load_ground_truth(dir, 3);
  REQUIRE(gt.size() == 3);
  for (int s = 0; s < 3; ++s) CHECK(gt[s].pixels == study.ground_truth[s].pixels);
}

TEST_CASE("extract_slices normalizes to [0,255] with constant-slice rule") {
  CmrVolume v;
  v.case_id = "x";
  v.rows = 2;
  v.cols = 2;
  v.n_slices = 3;
  v.voxels = {100, 300, 200, 100,   // slice 1: min 100 max 300
              7, 7, 7, 7,           // slice 2: constant
              0, 255, 128, 64};     // slice 3: already spanning
  auto slices = extract_slices(v);
  REQUIRE(slices.size() == 3);
  CHECK(slices[0].p == 1);
  CHECK(slices[0].n == 3);
  CHECK(slices[0].pixels(0, 0) == 0.0);
  CHECK(slices[0].pixels(0, 1) == 255.0);
  CHECK(slices[0].pixels(1, 0) == doctest::Approx(127.5));
  for (std::size_t i = 0; i < 4; ++i) CHECK(slices[1].pixels.data()[i] == 0.0);
  CHECK(slices[2].pixels(0, 0) == 0.0);
  CHECK(slices[2].pixels(0, 1) == 255.0);
  CHECK(slices[2].pixels(1, 0) == 128.0);
}

TEST_CASE("resize_bilinear identity and midpoint") {
  SliceImage s;
  s.pixels = Image(2, 2);
  s.pixels(0, 0) = 0;
  s.pixels(0, 1) = 255;
  s.pixels(1, 0) = 0;
  s.pixels(1, 1) = 255;
  auto same = resize_bilinear(s, 2, 2);
  CHECK(same.pixels == s.pixels);
  auto wide = resize_bilinear(s, 2, 3);
  CHECK(wide.pixels(0, 1) == doctest::Approx(127.5));
  CHECK(wide.pixels(1, 1) == doctest::Approx(127.5));
  CHECK_THROWS_AS(resize_bilinear(s, 1, 5), InvalidTarget);

  Image constant(7, 9, 42.0);
  auto big = resize_bilinear(constant, 20, 30);
  for (std::size_t i = 0; i < big.size(); ++i) CHECK(big.data()[i] == doctest::Approx(42.0));
}

TEST_CASE("disc mask survives a resize round trip") {
  Mask disc(100, 100, 0);
  for (int r = 0; r < 100; ++r)
    for (int c = 0; c < 100; ++c)
      if ((r - 50) * (r - 50) + (c - 50) * (c - 50) <= 30 * 30) disc(r, c) = 1;
  // through bilinear on the continuous image then 0.5 threshold
  Image img(100, 100);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = disc.data()[i];
  Image up = resize_bilinear(img, 200, 200);
  Image down = resize_bilinear(up, 100, 100);
  Mask back(100, 100, 0);
  for (std::size_t i = 0; i < back.size(); ++i) back.data()[i] = down.data()[i] > 0.5 ? 1 : 0;
  CHECK(dice(disc, back) >= 0.98);
}

TEST_CASE("ground truth from label volume selects lv_label") {
  const auto dir = temp_dir();
  CmrVolume labels;
  labels.case_id = "gt";
  labels.rows = 4;
  labels.cols = 4;
  labels.n_slices = 1;
  labels.voxels.assign(16, 0.0);
  labels.voxel(1, 1, 0) = 3;
  labels.voxel(2, 2, 0) = 2;
  const auto path = (dir / "labels.nii").string();
  write_volume_nifti(labels, path);
  auto masks = load_ground_truth(path, 3);
  REQUIRE(masks.size() == 1);
  CHECK(mask_area(masks[0].pixels) == 1);
  CHECK(masks[0].pixels(1, 1) == 1);

  auto none = load_ground_truth(path, 9);
  CHECK(mask_area(none[0].pixels) == 0);
}
