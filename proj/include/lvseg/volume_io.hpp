#ifndef LVSEG_VOLUME_IO_HPP
#define LVSEG_VOLUME_IO_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lvseg/grid.hpp"
#include "lvseg/slice_class.hpp"

namespace lvseg {

/// One ingested 3-D study. Voxels are stored slice-major; plane s is a dense
/// rows x cols block.
struct CmrVolume {
  std::string case_id;
  int rows = 0;
  int cols = 0;
  int n_slices = 0;
  std::vector<double> voxels;
  std::optional<std::array<double, 3>> spacing_mm;  // (dr, dc, ds)

  double& voxel(int r, int c, int s) {
    return voxels[(static_cast<std::size_t>(s) * rows + r) * cols + c];
  }
  double voxel(int r, int c, int s) const {
    return voxels[(static_cast<std::size_t>(s) * rows + r) * cols + c];
  }
};

/// One 2-D slice with its position bookkeeping. `p` is 1-based; `n` is the
/// slice count of the parent volume. After extract_slices the pixel range is
/// [0, 255].
struct SliceImage {
  Image pixels;
  int p = 1;
  int n = 1;
  std::string case_id;
};

struct GroundTruthMask {
  Mask pixels;
  int p = 1;
  int n = 1;
  std::string case_id;
};

/// Reads a NIfTI-1 single file (".nii", gzip-compressed ".nii.gz") or a
/// slice-directory (a directory containing manifest.txt and slice_NNN.pgm).
CmrVolume load_volume(const std::string& path);

/// Splits a volume into per-slice images, min-max rescaled to [0, 255]
/// (constant slices map to zero).
std::vector<SliceImage> extract_slices(const CmrVolume& v);

/// Corner-aligned bilinear resize; rows, cols >= 2.
SliceImage resize_bilinear(const SliceImage& s, int rows, int cols);
Image resize_bilinear(const Image& img, int rows, int cols);

/// Nearest-neighbor resize, used for label masks.
Mask resize_nearest(const Mask& m, int rows, int cols);

/// Loads a ground-truth label volume. For NIfTI the mask is voxel == lv_label;
/// for slice-directories the gt_NNN.pgm files are read (nonzero = true,
/// lv_label ignored). Masks are returned at native resolution.
std::vector<GroundTruthMask> load_ground_truth(const std::string& path, int lv_label);

/// Per-slice class labels from a slice-directory manifest, when present.
std::optional<std::vector<SliceClass>> load_manifest_classes(const std::string& dir);

// Writers. float32 NIfTI-1 (suffix ".gz" compresses); slice-directory with
// big-endian 16-bit PGMs (images scaled by 257, ground truth 0/65535).
void write_volume_nifti(const CmrVolume& v, const std::string& path);
void write_slice_directory(const CmrVolume& v, const std::vector<GroundTruthMask>& gt,
                           const std::vector<SliceClass>& classes, const std::string& dir);

// PGM primitives (P5). 16-bit files use big-endian samples.
Grid<std::uint16_t> read_pgm(const std::string& path);
void write_pgm16(const Grid<std::uint16_t>& img, const std::string& path);
void write_pgm8(const Mask& m, const std::string& path);          // 0/255
void write_pgm8_image(const Image& img, const std::string& path); // clamped [0,255]

}  // namespace lvseg

#endif
