#include "lvseg/features.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lvseg/errors.hpp"
#include "lvseg/kernels.hpp"

namespace lvseg {

namespace {
constexpr double kNormGuard = 1e-12;

std::vector<double> gaussian_taps(double sigma, int& half) {
  half = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * half + 1);
  double total = 0.0;
  for (int k = -half; k <= half; ++k) {
    const double w = std::exp(-0.5 * (k * k) / (sigma * sigma));
    taps[k + half] = w;
    total += w;
  }
  for (double& w : taps) w /= total;
  return taps;
}

void smooth_replicate(const Image& src, Image& dst, Image& tmp, const std::vector<double>& taps,
                      int half) {
  kernels::conv_rows(src.data(), tmp.data(), src.rows(), src.cols(), taps.data(), half,
                     kernels::Border::Replicate);
  kernels::conv_cols(tmp.data(), dst.data(), src.rows(), src.cols(), taps.data(), half,
                     kernels::Border::Replicate);
}

double sample_bilinear(const Image& img, double r, double c) {
  r = std::clamp(r, 0.0, static_cast<double>(img.rows() - 1));
  c = std::clamp(c, 0.0, static_cast<double>(img.cols() - 1));
  int r0 = std::min(static_cast<int>(r), img.rows() - 2);
  int c0 = std::min(static_cast<int>(c), img.cols() - 2);
  if (r0 < 0) r0 = 0;
  if (c0 < 0) c0 = 0;
  const double wr = r - r0, wc = c - c0;
  const double top = img(r0, c0) * (1.0 - wc) + img(r0, c0 + 1) * wc;
  const double bot = img(r0 + 1, c0) * (1.0 - wc) + img(r0 + 1, c0 + 1) * wc;
  return top * (1.0 - wr) + bot * wr;
}

void l2_normalize(double* h, int n) {
  const double norm = std::sqrt(kernels::dot(h, h, static_cast<std::size_t>(n)));
  if (norm < kNormGuard) {
    for (int i = 0; i < n; ++i) h[i] = 0.0;
  } else {
    for (int i = 0; i < n; ++i) h[i] /= norm;
  }
}
}  // namespace

void DaisyConfig::validate() const {
  if (step < 1 || radius < rings || rings < 1 || histograms_per_ring < 1 || orientations < 1)
    throw OutOfRange("invalid DAISY configuration");
  if (static_cast<int>(gaussian_sigmas.size()) != rings)
    throw OutOfRange("need one smoothing sigma per ring");
  for (double s : gaussian_sigmas)
    if (!(s > 0)) throw OutOfRange("smoothing sigmas must be positive");
}

double inverse_position_index(int p, int n) {
  if (n < 1 || p < 1 || p > n) throw OutOfRange("slice position outside [1, n]");
  return static_cast<double>(n - p + 1) / static_cast<double>(n);
}

std::vector<std::vector<double>> compute_daisy(const SliceImage& s, const DaisyConfig& cfg) {
  cfg.validate();
  const Image& img = s.pixels;
  const int rows = img.rows(), cols = img.cols();
  const int gr = cfg.grid_count(rows), gc = cfg.grid_count(cols);
  if (gr == 0 || gc == 0) throw ImageTooSmall("no DAISY keypoint fits the image");

  // gradients: central differences, replicate border
  Image gx(rows, cols), gy(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int cl = c > 0 ? c - 1 : 0, cr = c < cols - 1 ? c + 1 : cols - 1;
      const int ru = r > 0 ? r - 1 : 0, rd = r < rows - 1 ? r + 1 : rows - 1;
      gx(r, c) = (img(r, cr) - img(r, cl)) / 2.0;
      gy(r, c) = (img(rd, c) - img(ru, c)) / 2.0;
    }

  // half-rectified orientation layers, one smoothed copy per ring sigma
  const int O = cfg.orientations;
  const std::size_t n = img.size();
  std::vector<Image> layers(O, Image(rows, cols));
  for (int o = 0; o < O; ++o) {
    const double th = 2.0 * M_PI * o / O;
    kernels::directional_relu(gx.data(), gy.data(), std::cos(th), std::sin(th),
                              layers[o].data(), n);
  }
  std::vector<std::vector<Image>> smoothed(cfg.rings, std::vector<Image>(O, Image(rows, cols)));
  Image tmp(rows, cols);
  for (int q = 0; q < cfg.rings; ++q) {
    int half;
    const auto taps = gaussian_taps(cfg.gaussian_sigmas[q], half);
    for (int o = 0; o < O; ++o) smooth_replicate(layers[o], smoothed[q][o], tmp, taps, half);
  }

  const int H = cfg.histograms_per_ring;
  const int desc_len = cfg.descriptor_length();
  std::vector<std::vector<double>> descriptors;
  descriptors.reserve(static_cast<std::size_t>(gr) * gc);

  for (int ir = 0; ir < gr; ++ir) {
    const int kr = cfg.radius + ir * cfg.step;
    for (int ic = 0; ic < gc; ++ic) {
      const int kc = cfg.radius + ic * cfg.step;
      std::vector<double> desc(desc_len);
      double* h = desc.data();
      for (int o = 0; o < O; ++o) h[o] = smoothed[0][o](kr, kc);
      l2_normalize(h, O);
      h += O;
      for (int q = 0; q < cfg.rings; ++q) {
        const double rq = static_cast<double>(cfg.radius) * (q + 1) / cfg.rings;
        for (int j = 0; j < H; ++j) {
          const double phi = 2.0 * M_PI * j / H;
          const double pr = kr + rq * std::sin(phi);
          const double pc = kc + rq * std::cos(phi);
          for (int o = 0; o < O; ++o) h[o] = sample_bilinear(smoothed[q][o], pr, pc);
          l2_normalize(h, O);
          h += O;
        }
      }
      l2_normalize(desc.data(), desc_len);
      descriptors.push_back(std::move(desc));
    }
  }
  return descriptors;
}

FeatureVector build_feature_vector(const SliceImage& s, const DaisyConfig& cfg) {
  const auto descriptors = compute_daisy(s, cfg);
  FeatureVector f;
  f.case_id = s.case_id;
  f.p = s.p;
  f.n = s.n;
  f.values.reserve(descriptors.size() * cfg.descriptor_length() + 1);
  for (const auto& d : descriptors) f.values.insert(f.values.end(), d.begin(), d.end());
  f.values.push_back(inverse_position_index(s.p, s.n));
  return f;
}

void write_feature_csv(const std::string& path, const std::vector<FeatureVector>& rows) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot create " + path);
  if (rows.empty()) throw EmptyStudy("no feature rows to write");
  const std::size_t d = rows.front().values.size();
  out << "case_id,p,n";
  for (std::size_t i = 0; i < d; ++i) out << ",v" << i;
  out << ",label\n";
  char buf[40];
  for (const auto& f : rows) {
    if (f.values.size() != d) throw DimensionMismatch("inconsistent feature lengths");
    out << f.case_id << "," << f.p << "," << f.n;
    for (double v : f.values) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    out << "," << (f.label ? to_string(*f.label) : "") << "\n";
  }
  if (!out) throw IoFailure("write failed for " + path);
}

std::vector<FeatureVector> read_feature_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw MalformedHeader("empty feature CSV " + path);
  std::vector<FeatureVector> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    FeatureVector f;
    std::size_t pos = 0;
    int field = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      std::string_view tok(line.data() + pos, comma - pos);
      if (field == 0) {
        f.case_id = std::string(tok);
      } else if (field == 1 || field == 2) {
        int v = 0;
        std::from_chars(tok.data(), tok.data() + tok.size(), v);
        (field == 1 ? f.p : f.n) = v;
      } else if (comma == line.size()) {
        // last column is the label
        if (!tok.empty()) f.label = slice_class_from_string(std::string(tok));
      } else {
        double v = 0;
        auto [p_end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc()) throw MalformedHeader("bad numeric field in " + path);
        (void)p_end;
        f.values.push_back(v);
      }
      ++field;
      pos = comma + 1;
      if (comma == line.size()) break;
    }
    rows.push_back(std::move(f));
  }
  return rows;
}

}  // namespace lvseg
