#include "lvseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lvseg/errors.hpp"

namespace lvseg {

namespace {

void require_same_shape(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("mask shapes differ");
}

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

Counts count_pixels(const Mask& pred, const Mask& truth) {
  Counts k;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.data()[i] != 0;
    const bool t = truth.data()[i] != 0;
    if (p && t)
      ++k.tp;
    else if (p)
      ++k.fp;
    else if (t)
      ++k.fn;
    else
      ++k.tn;
  }
  return k;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// 1-D squared distance transform (Felzenszwalb & Huttenlocher lower envelope)
void edt_1d(const double* f, double* d, int n, int* v, double* z) {
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s;
    for (;;) {
      const int p = v[k];
      s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * q - 2.0 * p);
      if (s <= z[k]) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

double dice(const Mask& a, const Mask& b) {
  require_same_shape(a, b);
  std::size_t inter = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.data()[i] != 0, y = b.data()[i] != 0;
    na += x;
    nb += y;
    inter += x && y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

double jaccard(const Mask& a, const Mask& b) {
  require_same_shape(a, b);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.data()[i] != 0, y = b.data()[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

ConfusionMetrics confusion_metrics(const Mask& predicted, const Mask& truth) {
  require_same_shape(predicted, truth);
  const Counts k = count_pixels(predicted, truth);
  ConfusionMetrics m;
  m.precision = ratio(k.tp, k.tp + k.fp);
  m.recall = ratio(k.tp, k.tp + k.fn);
  m.f1 = (m.precision + m.recall) > 0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.accuracy = ratio(k.tp + k.tn, k.tp + k.fp + k.fn + k.tn);
  m.specificity = ratio(k.tn, k.tn + k.fp);
  m.mae = ratio(k.fp + k.fn, k.tp + k.fp + k.fn + k.tn);
  return m;
}

std::vector<std::pair<int, int>> extract_boundary(const Mask& m) {
  if (mask_area(m) == 0) throw EmptyMask("extract_boundary on empty mask");
  std::vector<std::pair<int, int>> out;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      if (!m(r, c)) continue;
      const bool edge = r == 0 || r == m.rows() - 1 || c == 0 || c == m.cols() - 1 ||
                        !m(r - 1, c) || !m(r + 1, c) || !m(r, c - 1) || !m(r, c + 1);
      if (edge) out.emplace_back(r, c);
    }
  return out;
}

Image squared_edt(const Mask& seeds) {
  const int rows = seeds.rows(), cols = seeds.cols();
  constexpr double kInf = 1e20;
  Image g(rows, cols);
  std::vector<double> f(std::max(rows, cols)), d(std::max(rows, cols));
  std::vector<int> v(std::max(rows, cols));
  std::vector<double> z(std::max(rows, cols) + 1);

  // columns first
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) f[r] = seeds(r, c) ? 0.0 : kInf;
    edt_1d(f.data(), d.data(), rows, v.data(), z.data());
    for (int r = 0; r < rows; ++r) g(r, c) = d[r];
  }
  // then rows
  Image out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) f[c] = g(r, c);
    edt_1d(f.data(), d.data(), cols, v.data(), z.data());
    for (int c = 0; c < cols; ++c) out(r, c) = d[c];
  }
  return out;
}

BoundaryField make_boundary_field(const Mask& m) {
  BoundaryField bf;
  bf.boundary = extract_boundary(m);
  Mask seeds(m.rows(), m.cols(), 0);
  for (const auto& [r, c] : bf.boundary) seeds(r, c) = 1;
  bf.sq_edt = squared_edt(seeds);
  return bf;
}

BoundaryDistances boundary_distances(const BoundaryField& a, const BoundaryField& b) {
  double sup_ab = 0, sup_ba = 0, sum_ab = 0, sum_ba = 0;
  for (const auto& [r, c] : a.boundary) {
    const double sq = b.sq_edt(r, c);
    sup_ab = std::max(sup_ab, sq);
    sum_ab += std::sqrt(sq);
  }
  for (const auto& [r, c] : b.boundary) {
    const double sq = a.sq_edt(r, c);
    sup_ba = std::max(sup_ba, sq);
    sum_ba += std::sqrt(sq);
  }
  const double mean_ab = sum_ab / static_cast<double>(a.boundary.size());
  const double mean_ba = sum_ba / static_cast<double>(b.boundary.size());
  BoundaryDistances d;
  d.hausdorff = std::sqrt(std::max(sup_ab, sup_ba));
  d.mad = 0.5 * (mean_ab + mean_ba);
  d.bde = mean_ab;
  return d;
}

BoundaryDistances boundary_distances(const Mask& a, const Mask& b) {
  require_same_shape(a, b);
  return boundary_distances(make_boundary_field(a), make_boundary_field(b));
}

MetricReport evaluate_masks(const Mask& predicted, const Mask& truth) {
  require_same_shape(predicted, truth);
  MetricReport r;
  r.dice = dice(predicted, truth);
  r.jaccard = jaccard(predicted, truth);
  const ConfusionMetrics cm = confusion_metrics(predicted, truth);
  r.precision = cm.precision;
  r.recall = cm.recall;
  r.f1 = cm.f1;
  r.accuracy = cm.accuracy;
  r.specificity = cm.specificity;
  r.mae = cm.mae;
  if (mask_area(predicted) > 0 && mask_area(truth) > 0) {
    const BoundaryDistances bd = boundary_distances(predicted, truth);
    r.hausdorff = bd.hausdorff;
    r.mad = bd.mad;
    r.bde = bd.bde;
    r.has_distances = true;
  } else {
    r.hausdorff = r.mad = r.bde = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

}  // namespace lvseg
