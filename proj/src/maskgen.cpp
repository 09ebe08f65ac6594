#include "lvseg/maskgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lvseg/errors.hpp"
#include "lvseg/kernels.hpp"

namespace lvseg {

namespace {

struct Labeled {
  Grid<int> labels;  // 0 = background, components numbered from 1
  int count = 0;
};

Labeled label_components(const Mask& m) {
  Labeled out;
  out.labels = Grid<int>(m.rows(), m.cols(), 0);
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      if (!m(r, c) || out.labels(r, c)) continue;
      const int id = ++out.count;
      stack.push_back({r, c});
      out.labels(r, c) = id;
      while (!stack.empty()) {
        auto [pr, pc] = stack.back();
        stack.pop_back();
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = pr + dr, nc = pc + dc;
            if (nr < 0 || nr >= m.rows() || nc < 0 || nc >= m.cols()) continue;
            if (m(nr, nc) && !out.labels(nr, nc)) {
              out.labels(nr, nc) = id;
              stack.push_back({nr, nc});
            }
          }
      }
    }
  return out;
}

// all components in label order, two passes over the image regardless of how
// many components there are
std::vector<RegionProps> props_of_all(const Labeled& lab) {
  const int rows = lab.labels.rows(), cols = lab.labels.cols();
  std::vector<RegionProps> props(lab.count);
  std::vector<double> sum_r(lab.count, 0.0), sum_c(lab.count, 0.0);
  for (auto& p : props) {
    p.bbox_r0 = rows;
    p.bbox_c0 = cols;
    p.bbox_r1 = -1;
    p.bbox_c1 = -1;
  }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int id = lab.labels(r, c);
      if (!id) continue;
      RegionProps& p = props[id - 1];
      ++p.area;
      sum_r[id - 1] += r;
      sum_c[id - 1] += c;
      p.bbox_r0 = std::min(p.bbox_r0, r);
      p.bbox_c0 = std::min(p.bbox_c0, c);
      p.bbox_r1 = std::max(p.bbox_r1, r);
      p.bbox_c1 = std::max(p.bbox_c1, c);
      const bool up = r == 0 || lab.labels(r - 1, c) != id;
      const bool down = r == rows - 1 || lab.labels(r + 1, c) != id;
      const bool left = c == 0 || lab.labels(r, c - 1) != id;
      const bool right = c == cols - 1 || lab.labels(r, c + 1) != id;
      p.perimeter += up + down + left + right;
    }
  for (int i = 0; i < lab.count; ++i) {
    RegionProps& p = props[i];
    p.centroid_r = sum_r[i] / p.area;
    p.centroid_c = sum_c[i] / p.area;
    p.circularity = 4.0 * M_PI * p.area / (static_cast<double>(p.perimeter) * p.perimeter);
  }

  // second central moments with the 1/12 pixel-extent term, which keeps
  // eccentricity < 1 even for single-pixel-wide components
  std::vector<double> m20(lab.count, 0.0), m02(lab.count, 0.0), m11(lab.count, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int id = lab.labels(r, c);
      if (!id) continue;
      const double dr = r - props[id - 1].centroid_r, dc = c - props[id - 1].centroid_c;
      m20[id - 1] += dr * dr;
      m02[id - 1] += dc * dc;
      m11[id - 1] += dr * dc;
    }
  for (int i = 0; i < lab.count; ++i) {
    RegionProps& p = props[i];
    const double a20 = m20[i] / p.area + 1.0 / 12.0;
    const double a02 = m02[i] / p.area + 1.0 / 12.0;
    const double a11 = m11[i] / p.area;
    const double tr = a20 + a02;
    const double det = std::sqrt((a20 - a02) * (a20 - a02) + 4.0 * a11 * a11);
    const double l_max = (tr + det) / 2.0, l_min = (tr - det) / 2.0;
    p.eccentricity = l_max > 0 ? std::sqrt(std::max(0.0, 1.0 - l_min / l_max)) : 0.0;
  }
  return props;
}

double quantile_value(const std::vector<double>& sorted, double q) {
  // nearest-rank on the sorted copy
  const std::size_t n = sorted.size();
  std::size_t k = static_cast<std::size_t>(q * (n - 1));
  return sorted[std::min(k, n - 1)];
}

// candidate record carrying the recipe to rebuild its mask on demand, so the
// sweep never materializes masks for losers
struct Candidate {
  RegionProps props;
  double score = 0;
  double beta = 0;
  double threshold = 0;
  std::pair<int, int> rep;  // a pixel of the component
};

// All gated candidates over the (beta, quantile) sweep in deterministic order.
std::vector<Candidate> enumerate_candidates(
    const SliceImage& s, std::optional<std::pair<double, double>> prev_centroid,
    const MaskGenConfig& cfg) {
  std::vector<Candidate> out;
  const double mean =
      kernels::sum(s.pixels.data(), s.pixels.size()) / static_cast<double>(s.pixels.size());
  if (mean <= 1e-9) return out;  // blank slice: nothing detectable

  const int rows = s.pixels.rows(), cols = s.pixels.cols();
  const double ctr_r = (rows - 1) / 2.0, ctr_c = (cols - 1) / 2.0;
  const double diag = std::hypot(static_cast<double>(rows), static_cast<double>(cols));

  std::vector<double> sorted(s.pixels.size());
  Mask bin(rows, cols);
  for (double beta : cfg.beta_schedule) {
    const SliceImage adj = adjust_intensity(s, beta);
    std::copy(adj.pixels.data(), adj.pixels.data() + adj.pixels.size(), sorted.begin());
    std::sort(sorted.begin(), sorted.end());
    for (double q : cfg.threshold_quantiles) {
      const double t = quantile_value(sorted, q);
      bool any = false;
      for (std::size_t i = 0; i < bin.size(); ++i)
        any |= (bin.data()[i] = adj.pixels.data()[i] >= t ? 1 : 0) != 0;
      if (!any) continue;
      const Labeled lab = label_components(bin);
      const auto all_props = props_of_all(lab);
      for (int id = 1; id <= lab.count; ++id) {
        const RegionProps& p = all_props[id - 1];
        if (p.area < cfg.area_min || p.area > cfg.area_max) continue;
        double score = cfg.w_circularity * p.circularity -
                       cfg.w_center * std::hypot(p.centroid_r - ctr_r, p.centroid_c - ctr_c) / diag;
        if (prev_centroid)
          score -= cfg.w_prev *
                   std::hypot(p.centroid_r - prev_centroid->first,
                              p.centroid_c - prev_centroid->second) /
                   diag;
        Candidate cand;
        cand.props = p;
        cand.score = score;
        cand.beta = beta;
        cand.threshold = t;
        cand.rep = {-1, -1};
        for (int c = p.bbox_c0; c <= p.bbox_c1 && cand.rep.first < 0; ++c)
          if (lab.labels(p.bbox_r0, c) == id) cand.rep = {p.bbox_r0, c};
        out.push_back(cand);
      }
    }
  }
  return out;
}

// rebuild one candidate's component: re-threshold and flood from its pixel
Mask materialize(const SliceImage& s, const Candidate& cand) {
  const SliceImage adj = adjust_intensity(s, cand.beta);
  const int rows = adj.pixels.rows(), cols = adj.pixels.cols();
  Mask out(rows, cols, 0);
  std::vector<std::pair<int, int>> stack{cand.rep};
  out(cand.rep.first, cand.rep.second) = 1;
  while (!stack.empty()) {
    auto [pr, pc] = stack.back();
    stack.pop_back();
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const int nr = pr + dr, nc = pc + dc;
        if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
        if (out(nr, nc) || adj.pixels(nr, nc) < cand.threshold) continue;
        out(nr, nc) = 1;
        stack.push_back({nr, nc});
      }
  }
  return out;
}

}  // namespace

SliceImage adjust_intensity(const SliceImage& s, double beta) {
  const std::size_t n = s.pixels.size();
  const double x = kernels::sum(s.pixels.data(), n) / static_cast<double>(n);
  if (x <= 1e-9) throw ZeroIntensity("slice mean intensity is zero");
  const double alpha = 100.0 / (2.0 * x);
  SliceImage out;
  out.p = s.p;
  out.n = s.n;
  out.case_id = s.case_id;
  out.pixels = Image(s.pixels.rows(), s.pixels.cols());
  kernels::scale_offset(s.pixels.data(), alpha, beta, out.pixels.data(), n);
  for (std::size_t i = 0; i < n; ++i)
    out.pixels.data()[i] = std::clamp(out.pixels.data()[i], 0.0, 255.0);
  return out;
}

std::vector<RegionProps> region_properties(const Mask& m) {
  if (mask_area(m) == 0) throw EmptyMask("region_properties on empty mask");
  return props_of_all(label_components(m));
}

std::optional<MaskSelection> select_lv_mask(
    const SliceImage& s, std::optional<std::pair<double, double>> prev_centroid,
    const MaskGenConfig& cfg) {
  const auto candidates = enumerate_candidates(s, prev_centroid, cfg);
  if (candidates.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i)
    if (candidates[i].score > candidates[best].score) best = i;
  MaskSelection sel;
  sel.mask = materialize(s, candidates[best]);
  sel.props = candidates[best].props;
  sel.score = candidates[best].score;
  return sel;
}

SeedTriple sequential_seed_masks(const std::vector<SliceImage>& first_slices,
                                 const MaskGenConfig& cfg) {
  if (first_slices.size() < 3) throw UsageError("sequential_seed_masks needs 3 slices");

  std::array<std::vector<Candidate>, 3> beams;
  for (int i = 0; i < 3; ++i) {
    auto cands = enumerate_candidates(first_slices[i], std::nullopt, cfg);
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    if (cands.size() > static_cast<std::size_t>(cfg.beam)) cands.resize(cfg.beam);
    beams[i] = std::move(cands);
  }

  SeedTriple out;
  double best_total = 0;
  std::array<int, 3> best_idx{-1, -1, -1};
  auto dist = [](const Candidate& a, const Candidate& b) {
    return std::hypot(a.props.centroid_r - b.props.centroid_r,
                      a.props.centroid_c - b.props.centroid_c);
  };
  for (std::size_t i = 0; i < beams[0].size(); ++i)
    for (std::size_t j = 0; j < beams[1].size(); ++j)
      for (std::size_t k = 0; k < beams[2].size(); ++k) {
        const double d01 = dist(beams[0][i], beams[1][j]);
        const double d02 = dist(beams[0][i], beams[2][k]);
        const double d12 = dist(beams[1][j], beams[2][k]);
        if (d01 > cfg.max_pair_distance || d02 > cfg.max_pair_distance ||
            d12 > cfg.max_pair_distance)
          continue;
        const double total = d01 + d02 + d12;
        if (best_idx[0] < 0 || total < best_total) {
          best_total = total;
          best_idx = {static_cast<int>(i), static_cast<int>(j), static_cast<int>(k)};
        }
      }

  if (best_idx[0] >= 0) {
    out.consistent = true;
    for (int s = 0; s < 3; ++s) {
      const Candidate& c = beams[s][best_idx[s]];
      out.masks[s] = MaskSelection{materialize(first_slices[s], c), c.props, c.score};
    }
    return out;
  }

  // no consistent triple: fall back to independent per-slice selection
  out.consistent = false;
  for (int s = 0; s < 3; ++s) out.masks[s] = select_lv_mask(first_slices[s], std::nullopt, cfg);
  return out;
}

Mask erode3x3(const Mask& m) {
  Mask out(m.rows(), m.cols(), 0);
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      if (!m(r, c)) continue;
      bool keep = r > 0 && r < m.rows() - 1 && c > 0 && c < m.cols() - 1;
      for (int dr = -1; keep && dr <= 1; ++dr)
        for (int dc = -1; keep && dc <= 1; ++dc)
          if (!m(r + dr, c + dc)) keep = false;
      if (keep) out(r, c) = 1;
    }
  return out;
}

Mask largest_component(const Mask& m) {
  if (mask_area(m) == 0) return m;
  const Labeled lab = label_components(m);
  std::vector<int> areas(lab.count + 1, 0);
  for (std::size_t i = 0; i < lab.labels.size(); ++i) ++areas[lab.labels.data()[i]];
  int best = 1;
  for (int id = 2; id <= lab.count; ++id)
    if (areas[id] > areas[best]) best = id;
  Mask out(m.rows(), m.cols(), 0);
  for (std::size_t i = 0; i < m.size(); ++i)
    out.data()[i] = lab.labels.data()[i] == best ? 1 : 0;
  return out;
}

Mask shrink_mask(const Mask& m, SliceClass cls, const MaskGenConfig& cfg) {
  const std::size_t area0 = mask_area(m);
  if (area0 == 0) throw EmptyMask("shrink_mask on empty mask");
  Mask current = m;

  if (cls == SliceClass::Apical) {
    while (mask_area(current) >= static_cast<std::size_t>(cfg.apical_area_limit)) {
      Mask eroded = erode3x3(current);
      if (mask_area(eroded) == 0) break;
      current = std::move(eroded);
    }
    return current;
  }

  const double frac =
      cls == SliceClass::Basal ? cfg.shrink_target_basal : cfg.shrink_target_mid;
  const double target = frac * static_cast<double>(area0);
  while (static_cast<double>(mask_area(current)) > target) {
    Mask eroded = erode3x3(current);
    if (mask_area(eroded) == 0) break;
    current = std::move(eroded);
  }
  return current;
}

}  // namespace lvseg
