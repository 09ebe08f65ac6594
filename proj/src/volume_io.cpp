#include "lvseg/volume_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "lvseg/errors.hpp"
#include "lvseg/kernels.hpp"

namespace fs = std::filesystem;

namespace lvseg {

namespace {

constexpr int kNiftiHeaderSize = 348;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;
constexpr std::int16_t kDtUint16 = 512;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string stem_of(const std::string& path) {
  std::string name = fs::path(path).filename().string();
  if (ends_with(name, ".nii.gz")) return name.substr(0, name.size() - 7);
  if (ends_with(name, ".nii")) return name.substr(0, name.size() - 4);
  return name;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path, bool gz) {
  std::vector<std::uint8_t> bytes;
  if (gz) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw IoFailure("cannot open " + path);
    std::uint8_t buf[1 << 16];
    int got;
    while ((got = gzread(f, buf, sizeof buf)) > 0) bytes.insert(bytes.end(), buf, buf + got);
    bool bad = got < 0;
    gzclose(f);
    if (bad) throw IoFailure("gzip decode failed for " + path);
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path);
    in.seekg(0, std::ios::end);
    bytes.resize(static_cast<std::size_t>(in.tellg()));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw IoFailure("short read on " + path);
  }
  return bytes;
}

template <typename T>
T load_le(const std::uint8_t* p, bool swap) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if (swap) {
    auto* b = reinterpret_cast<std::uint8_t*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

CmrVolume load_nifti(const std::string& path) {
  const bool gz = ends_with(path, ".gz");
  std::vector<std::uint8_t> bytes = read_file_bytes(path, gz);
  if (bytes.size() < kNiftiHeaderSize + 4)
    throw MalformedHeader("file shorter than a NIfTI-1 header: " + path);

  // Endianness: dim[0] must decode into 1..7 in exactly one byte order.
  std::int16_t dim0_native = load_le<std::int16_t>(bytes.data() + 40, false);
  bool swap;
  if (dim0_native >= 1 && dim0_native <= 7) {
    swap = false;
  } else {
    std::int16_t dim0_sw = load_le<std::int16_t>(bytes.data() + 40, true);
    if (dim0_sw < 1 || dim0_sw > 7) throw MalformedHeader("dim[0] invalid in both byte orders");
    swap = true;
  }

  const std::int32_t sizeof_hdr = load_le<std::int32_t>(bytes.data() + 0, swap);
  if (sizeof_hdr != kNiftiHeaderSize) throw MalformedHeader("sizeof_hdr != 348");
  if (std::memcmp(bytes.data() + 344, "n+1\0", 4) != 0)
    throw MalformedHeader("magic is not \"n+1\" (two-file NIfTI and other formats unsupported)");

  std::int16_t dim[8];
  for (int i = 0; i < 8; ++i) dim[i] = load_le<std::int16_t>(bytes.data() + 40 + 2 * i, swap);
  const int nd = dim[0];
  if (nd < 2) throw UnsupportedDataType("need at least 2 spatial dimensions");
  for (int i = 4; i <= nd && i < 8; ++i)
    if (dim[i] > 1) throw UnsupportedDataType("time-resolved (4-D) volumes unsupported");
  const int nx = dim[1], ny = dim[2], nz = nd >= 3 ? std::max<int>(dim[3], 1) : 1;
  if (nx <= 0 || ny <= 0 || nz <= 0) throw MalformedHeader("non-positive dimension");

  const std::int16_t datatype = load_le<std::int16_t>(bytes.data() + 70, swap);
  const float vox_offset_f = load_le<float>(bytes.data() + 108, swap);
  if (!std::isfinite(vox_offset_f) || vox_offset_f < kNiftiHeaderSize ||
      vox_offset_f > 1e9f)
    throw MalformedHeader("vox_offset outside the plausible range");
  const std::size_t vox_offset = static_cast<std::size_t>(vox_offset_f);

  float pixdim[4];
  for (int i = 0; i < 4; ++i) pixdim[i] = load_le<float>(bytes.data() + 76 + 4 * i, swap);

  const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
  std::size_t elem_size;
  switch (datatype) {
    case kDtInt16:
    case kDtUint16:
      elem_size = 2;
      break;
    case kDtFloat32:
      elem_size = 4;
      break;
    default:
      throw UnsupportedDataType("NIfTI datatype code " + std::to_string(datatype) +
                                " (supported: int16, uint16, float32)");
  }
  if (bytes.size() < vox_offset + n * elem_size) throw MalformedHeader("voxel data truncated");

  CmrVolume vol;
  vol.case_id = stem_of(path);
  vol.rows = ny;
  vol.cols = nx;
  vol.n_slices = nz;
  vol.voxels.resize(n);
  if (pixdim[1] > 0 && pixdim[2] > 0)
    vol.spacing_mm = std::array<double, 3>{pixdim[2], pixdim[1], pixdim[3]};

  const std::uint8_t* data = bytes.data() + vox_offset;
  std::size_t src = 0;
  for (int s = 0; s < nz; ++s)
    for (int r = 0; r < ny; ++r)
      for (int c = 0; c < nx; ++c, ++src) {
        double v;
        // NIfTI stores x fastest: linear index c + nx*(r + ny*s) == src.
        switch (datatype) {
          case kDtInt16:
            v = load_le<std::int16_t>(data + src * 2, swap);
            break;
          case kDtUint16:
            v = load_le<std::uint16_t>(data + src * 2, swap);
            break;
          default:
            v = load_le<float>(data + src * 4, swap);
            break;
        }
        if (!std::isfinite(v)) throw IoFailure("non-finite voxel in " + path);
        vol.voxel(r, c, s) = v;
      }
  return vol;
}

void store_le(std::vector<std::uint8_t>& out, std::size_t off, const void* p, std::size_t n) {
  std::memcpy(out.data() + off, p, n);
}

std::vector<std::uint8_t> build_nifti_bytes(const CmrVolume& v) {
  static_assert(std::endian::native == std::endian::little, "writer assumes little-endian host");
  const std::size_t n = v.voxels.size();
  std::vector<std::uint8_t> bytes(352 + n * 4, 0);
  const std::int32_t hdr = kNiftiHeaderSize;
  store_le(bytes, 0, &hdr, 4);
  std::int16_t dim[8] = {3, static_cast<std::int16_t>(v.cols), static_cast<std::int16_t>(v.rows),
                         static_cast<std::int16_t>(v.n_slices), 1, 1, 1, 1};
  store_le(bytes, 40, dim, 16);
  const std::int16_t datatype = kDtFloat32, bitpix = 32;
  store_le(bytes, 70, &datatype, 2);
  store_le(bytes, 72, &bitpix, 2);
  float pixdim[8] = {1.f, 1.f, 1.f, 1.f, 0.f, 0.f, 0.f, 0.f};
  if (v.spacing_mm) {
    pixdim[1] = static_cast<float>((*v.spacing_mm)[1]);
    pixdim[2] = static_cast<float>((*v.spacing_mm)[0]);
    pixdim[3] = static_cast<float>((*v.spacing_mm)[2]);
  }
  store_le(bytes, 76, pixdim, 32);
  const float vox_offset = 352.f;
  store_le(bytes, 108, &vox_offset, 4);
  std::memcpy(bytes.data() + 344, "n+1\0", 4);

  std::size_t dst = 352;
  for (int s = 0; s < v.n_slices; ++s)
    for (int r = 0; r < v.rows; ++r)
      for (int c = 0; c < v.cols; ++c, dst += 4) {
        const float f = static_cast<float>(v.voxel(r, c, s));
        store_le(bytes, dst, &f, 4);
      }
  return bytes;
}

// --- slice-directory format ---

std::map<std::string, std::string> read_manifest(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.txt");
  if (!in) throw IoFailure("missing manifest.txt in " + dir);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw MalformedHeader("manifest line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::string slice_file_name(const char* prefix, int p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03d.pgm", prefix, p);
  return buf;
}

int manifest_int(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw MalformedHeader("manifest missing key " + key);
  return std::stoi(it->second);
}

CmrVolume load_slice_directory(const std::string& dir) {
  auto kv = read_manifest(dir);
  CmrVolume vol;
  auto id = kv.find("case_id");
  vol.case_id = id != kv.end() ? id->second : fs::path(dir).filename().string();
  vol.n_slices = manifest_int(kv, "n_slices");
  vol.rows = manifest_int(kv, "rows");
  vol.cols = manifest_int(kv, "cols");
  if (vol.n_slices < 1 || vol.rows < 1 || vol.cols < 1)
    throw MalformedHeader("non-positive dims in manifest of " + dir);
  vol.voxels.resize(static_cast<std::size_t>(vol.rows) * vol.cols * vol.n_slices);
  for (int s = 0; s < vol.n_slices; ++s) {
    auto img = read_pgm((fs::path(dir) / slice_file_name("slice", s + 1)).string());
    if (img.rows() != vol.rows || img.cols() != vol.cols)
      throw ShapeMismatch("slice " + std::to_string(s + 1) + " shape differs from manifest");
    for (int r = 0; r < vol.rows; ++r)
      for (int c = 0; c < vol.cols; ++c) vol.voxel(r, c, s) = img(r, c);
  }
  return vol;
}

}  // namespace

CmrVolume load_volume(const std::string& path) {
  if (fs::is_directory(path)) return load_slice_directory(path);
  if (!fs::exists(path)) throw IoFailure("no such file: " + path);
  return load_nifti(path);
}

std::vector<SliceImage> extract_slices(const CmrVolume& v) {
  std::vector<SliceImage> out;
  out.reserve(v.n_slices);
  const std::size_t plane = static_cast<std::size_t>(v.rows) * v.cols;
  for (int s = 0; s < v.n_slices; ++s) {
    SliceImage si;
    si.p = s + 1;
    si.n = v.n_slices;
    si.case_id = v.case_id;
    si.pixels = Image(v.rows, v.cols);
    const double* src = v.voxels.data() + plane * s;
    double lo, hi;
    kernels::min_max(src, plane, lo, hi);
    if (hi > lo) {
      const double scale = 255.0 / (hi - lo);
      kernels::scale_offset(src, scale, -lo * scale, si.pixels.data(), plane);
    }
    out.push_back(std::move(si));
  }
  return out;
}

Image resize_bilinear(const Image& img, int rows, int cols) {
  if (rows < 2 || cols < 2) throw InvalidTarget("resize target must be at least 2x2");
  Image out(rows, cols);
  const double sr = static_cast<double>(img.rows() - 1) / (rows - 1);
  const double sc = static_cast<double>(img.cols() - 1) / (cols - 1);
  for (int r = 0; r < rows; ++r) {
    const double fr = r * sr;
    int r0 = static_cast<int>(fr);
    if (r0 >= img.rows() - 1) r0 = img.rows() - 2;
    if (r0 < 0) r0 = 0;
    const double wr = fr - r0;
    for (int c = 0; c < cols; ++c) {
      const double fc = c * sc;
      int c0 = static_cast<int>(fc);
      if (c0 >= img.cols() - 1) c0 = img.cols() - 2;
      if (c0 < 0) c0 = 0;
      const double wc = fc - c0;
      const double top = img(r0, c0) * (1.0 - wc) + img(r0, c0 + 1) * wc;
      const double bot = img(r0 + 1, c0) * (1.0 - wc) + img(r0 + 1, c0 + 1) * wc;
      out(r, c) = top * (1.0 - wr) + bot * wr;
    }
  }
  return out;
}

SliceImage resize_bilinear(const SliceImage& s, int rows, int cols) {
  SliceImage out;
  if (s.pixels.rows() == rows && s.pixels.cols() == cols) {
    out = s;
    return out;
  }
  out.pixels = resize_bilinear(s.pixels, rows, cols);
  out.p = s.p;
  out.n = s.n;
  out.case_id = s.case_id;
  return out;
}

Mask resize_nearest(const Mask& m, int rows, int cols) {
  if (rows < 2 || cols < 2) throw InvalidTarget("resize target must be at least 2x2");
  if (m.rows() == rows && m.cols() == cols) return m;
  Mask out(rows, cols);
  const double sr = static_cast<double>(m.rows() - 1) / (rows - 1);
  const double sc = static_cast<double>(m.cols() - 1) / (cols - 1);
  for (int r = 0; r < rows; ++r) {
    int r0 = static_cast<int>(std::lround(r * sr));
    r0 = std::clamp(r0, 0, m.rows() - 1);
    for (int c = 0; c < cols; ++c) {
      int c0 = static_cast<int>(std::lround(c * sc));
      c0 = std::clamp(c0, 0, m.cols() - 1);
      out(r, c) = m(r0, c0);
    }
  }
  return out;
}

std::vector<GroundTruthMask> load_ground_truth(const std::string& path, int lv_label) {
  std::vector<GroundTruthMask> out;
  if (fs::is_directory(path)) {
    auto kv = read_manifest(path);
    const int n = manifest_int(kv, "n_slices");
    auto id = kv.find("case_id");
    const std::string case_id = id != kv.end() ? id->second : fs::path(path).filename().string();
    for (int s = 0; s < n; ++s) {
      auto img = read_pgm((fs::path(path) / slice_file_name("gt", s + 1)).string());
      GroundTruthMask gm;
      gm.p = s + 1;
      gm.n = n;
      gm.case_id = case_id;
      gm.pixels = Mask(img.rows(), img.cols());
      for (int r = 0; r < img.rows(); ++r)
        for (int c = 0; c < img.cols(); ++c) gm.pixels(r, c) = img(r, c) > 0 ? 1 : 0;
      out.push_back(std::move(gm));
    }
    return out;
  }
  CmrVolume vol = load_nifti(path);
  for (int s = 0; s < vol.n_slices; ++s) {
    GroundTruthMask gm;
    gm.p = s + 1;
    gm.n = vol.n_slices;
    gm.case_id = vol.case_id;
    gm.pixels = Mask(vol.rows, vol.cols);
    for (int r = 0; r < vol.rows; ++r)
      for (int c = 0; c < vol.cols; ++c)
        gm.pixels(r, c) = std::lround(vol.voxel(r, c, s)) == lv_label ? 1 : 0;
    out.push_back(std::move(gm));
  }
  return out;
}

std::optional<std::vector<SliceClass>> load_manifest_classes(const std::string& dir) {
  auto kv = read_manifest(dir);
  const int n = manifest_int(kv, "n_slices");
  std::vector<SliceClass> classes;
  for (int s = 0; s < n; ++s) {
    char key[32];
    std::snprintf(key, sizeof key, "class_%03d", s + 1);
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    classes.push_back(slice_class_from_string(it->second));
  }
  return classes;
}

void write_volume_nifti(const CmrVolume& v, const std::string& path) {
  auto bytes = build_nifti_bytes(v);
  if (ends_with(path, ".gz")) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw IoFailure("cannot create " + path);
    const bool ok =
        gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size())) ==
        static_cast<int>(bytes.size());
    gzclose(f);
    if (!ok) throw IoFailure("gzip write failed for " + path);
  } else {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot create " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoFailure("write failed for " + path);
  }
}

void write_slice_directory(const CmrVolume& v, const std::vector<GroundTruthMask>& gt,
                           const std::vector<SliceClass>& classes, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream mf(fs::path(dir) / "manifest.txt");
  if (!mf) throw IoFailure("cannot create manifest in " + dir);
  mf << "case_id=" << v.case_id << "\n";
  mf << "n_slices=" << v.n_slices << "\n";
  mf << "rows=" << v.rows << "\n";
  mf << "cols=" << v.cols << "\n";
  for (std::size_t i = 0; i < classes.size(); ++i) {
    char key[32];
    std::snprintf(key, sizeof key, "class_%03d", static_cast<int>(i) + 1);
    mf << key << "=" << to_string(classes[i]) << "\n";
  }
  if (!mf) throw IoFailure("manifest write failed in " + dir);
  mf.close();

  for (int s = 0; s < v.n_slices; ++s) {
    Grid<std::uint16_t> img(v.rows, v.cols);
    for (int r = 0; r < v.rows; ++r)
      for (int c = 0; c < v.cols; ++c) {
        const double x = std::clamp(v.voxel(r, c, s), 0.0, 255.0) * 257.0;
        img(r, c) = static_cast<std::uint16_t>(std::lround(x));
      }
    write_pgm16(img, (fs::path(dir) / slice_file_name("slice", s + 1)).string());
  }
  for (const auto& gm : gt) {
    Grid<std::uint16_t> img(gm.pixels.rows(), gm.pixels.cols());
    for (int r = 0; r < img.rows(); ++r)
      for (int c = 0; c < img.cols(); ++c) img(r, c) = gm.pixels(r, c) ? 65535 : 0;
    write_pgm16(img, (fs::path(dir) / slice_file_name("gt", gm.p)).string());
  }
}

namespace {
int pgm_next_int(std::istream& in) {
  // skips whitespace and '#' comments
  for (;;) {
    int ch = in.peek();
    if (ch == '#') {
      std::string dummy;
      std::getline(in, dummy);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  int value;
  if (!(in >> value)) throw MalformedHeader("bad PGM header field");
  return value;
}
}  // namespace

Grid<std::uint16_t> read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path);
  char m0 = 0, m1 = 0;
  in.get(m0).get(m1);
  if (m0 != 'P' || m1 != '5') throw MalformedHeader("not a binary PGM: " + path);
  const int cols = pgm_next_int(in);
  const int rows = pgm_next_int(in);
  const int maxval = pgm_next_int(in);
  in.get();  // single whitespace after maxval
  if (cols < 1 || rows < 1 || maxval < 1 || maxval > 65535)
    throw MalformedHeader("bad PGM dimensions in " + path);
  Grid<std::uint16_t> img(rows, cols);
  const std::size_t n = img.size();
  if (maxval < 256) {
    std::vector<std::uint8_t> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (!in) throw IoFailure("truncated PGM data in " + path);
    for (std::size_t i = 0; i < n; ++i) img.data()[i] = buf[i];
  } else {
    std::vector<std::uint8_t> buf(n * 2);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw IoFailure("truncated PGM data in " + path);
    for (std::size_t i = 0; i < n; ++i)
      img.data()[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
  }
  return img;
}

void write_pgm16(const Grid<std::uint16_t>& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot create " + path);
  out << "P5\n" << img.cols() << " " << img.rows() << "\n65535\n";
  std::vector<std::uint8_t> buf(img.size() * 2);
  for (std::size_t i = 0; i < img.size(); ++i) {
    buf[2 * i] = static_cast<std::uint8_t>(img.data()[i] >> 8);
    buf[2 * i + 1] = static_cast<std::uint8_t>(img.data()[i] & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoFailure("write failed for " + path);
}

void write_pgm8(const Mask& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot create " + path);
  out << "P5\n" << m.cols() << " " << m.rows() << "\n255\n";
  std::vector<std::uint8_t> buf(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) buf[i] = m.data()[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoFailure("write failed for " + path);
}

void write_pgm8_image(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot create " + path);
  out << "P5\n" << img.cols() << " " << img.rows() << "\n255\n";
  std::vector<std::uint8_t> buf(img.size());
  for (std::size_t i = 0; i < img.size(); ++i)
    buf[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.data()[i], 0.0, 255.0)));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoFailure("write failed for " + path);
}

}  // namespace lvseg
