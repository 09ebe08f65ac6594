#include "lvseg/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lvseg/errors.hpp"
#include "lvseg/parallel.hpp"
#include "lvseg/rng.hpp"

namespace lvseg {

namespace {

int label_of(const FeatureVector& f) {
  if (!f.label) throw UsageError("feature vector without a label");
  return static_cast<int>(*f.label);
}

double gini(const std::array<int, kNumClasses>& counts, int total) {
  if (total == 0) return 0.0;
  double g = 1.0;
  for (int c : counts) {
    const double p = static_cast<double>(c) / total;
    g -= p * p;
  }
  return g;
}

int argmax_class(const std::array<int, kNumClasses>& counts) {
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c)
    if (counts[c] > counts[best]) best = c;  // ties keep the smaller class
  return best;
}

struct TreeBuilder {
  const std::vector<const FeatureVector*>& data;
  const ForestHyper& hyper;
  int feature_dim;
  int mtry;
  Rng rng;
  DecisionTree tree;

  // scratch: (value, label) pairs of the node being split
  std::vector<std::pair<double, int>> sorted;

  int build(std::vector<int>& samples, int depth) {
    std::array<int, kNumClasses> counts{};
    for (int i : samples) ++counts[label_of(*data[i])];
    const int total = static_cast<int>(samples.size());

    const bool pure = std::count(counts.begin(), counts.end(), 0) >= kNumClasses - 1;
    const bool depth_capped = hyper.max_depth > 0 && depth >= hyper.max_depth;
    if (pure || depth_capped || total < hyper.min_samples_split) return make_leaf(counts);

    // candidate features: all of them in index order when mtry == dim
    // (no rng draw), otherwise a seeded sample without replacement
    std::vector<int> features;
    if (mtry >= feature_dim) {
      features.resize(feature_dim);
      std::iota(features.begin(), features.end(), 0);
    } else {
      features.resize(feature_dim);
      std::iota(features.begin(), features.end(), 0);
      for (int i = 0; i < mtry; ++i) {
        const std::size_t j = i + rng.below(feature_dim - i);
        std::swap(features[i], features[j]);
      }
      features.resize(mtry);
    }

    const double parent = gini(counts, total);
    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;

    for (int f : features) {
      sorted.clear();
      for (int i : samples) sorted.emplace_back(data[i]->values[f], label_of(*data[i]));
      std::sort(sorted.begin(), sorted.end());

      std::array<int, kNumClasses> left{};
      int n_left = 0;
      for (int i = 0; i + 1 < total; ++i) {
        ++left[sorted[i].second];
        ++n_left;
        const double a = sorted[i].first, b = sorted[i + 1].first;
        if (a == b) continue;
        double t = (a + b) / 2.0;
        if (!(a < t)) t = b;  // guard midpoint rounding onto a
        std::array<int, kNumClasses> right{};
        for (int c = 0; c < kNumClasses; ++c) right[c] = counts[c] - left[c];
        const int n_right = total - n_left;
        const double w = (n_left * gini(left, n_left) + n_right * gini(right, n_right)) / total;
        const double gain = parent - w;
        const bool better =
            gain > best_gain ||
            (gain == best_gain && best_feature >= 0 &&
             (f < best_feature || (f == best_feature && t < best_threshold)));
        if (gain > 0.0 && better) {
          best_gain = gain;
          best_feature = f;
          best_threshold = t;
        }
      }
    }

    if (best_feature < 0) return make_leaf(counts);

    std::vector<int> ls, rs;
    for (int i : samples) {
      if (data[i]->values[best_feature] < best_threshold)
        ls.push_back(i);
      else
        rs.push_back(i);
    }
    samples.clear();
    samples.shrink_to_fit();

    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[id].feature = best_feature;
    tree.nodes[id].threshold = best_threshold;
    const int left_id = build(ls, depth + 1);
    tree.nodes[id].left = left_id;
    const int right_id = build(rs, depth + 1);
    tree.nodes[id].right = right_id;
    return id;
  }

  int make_leaf(const std::array<int, kNumClasses>& counts) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[id].counts = counts;
    return id;
  }
};

DecisionTree build_tree(const std::vector<const FeatureVector*>& data, const ForestHyper& hyper,
                        int feature_dim, int mtry, std::uint64_t tree_index) {
  TreeBuilder b{data, hyper, feature_dim, mtry, Rng::derive(hyper.seed, tree_index), {}, {}};
  const int n = static_cast<int>(data.size());
  std::vector<int> samples;
  samples.reserve(n);
  if (hyper.bootstrap) {
    for (int i = 0; i < n; ++i) samples.push_back(static_cast<int>(b.rng.below(n)));
  } else {
    samples.resize(n);
    std::iota(samples.begin(), samples.end(), 0);
  }
  b.build(samples, 0);
  return std::move(b.tree);
}

}  // namespace

SliceClass DecisionTree::predict(const std::vector<double>& x) const {
  int id = 0;
  while (nodes[id].feature >= 0)
    id = x[nodes[id].feature] < nodes[id].threshold ? nodes[id].left : nodes[id].right;
  return static_cast<SliceClass>(argmax_class(nodes[id].counts));
}

std::pair<std::vector<FeatureVector>, std::vector<FeatureVector>> stratified_split(
    const std::vector<FeatureVector>& data, double train_ratio, std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0))
    throw UsageError("train_ratio must be in (0, 1)");
  std::array<std::vector<int>, kNumClasses> by_class;
  for (std::size_t i = 0; i < data.size(); ++i)
    by_class[label_of(data[i])].push_back(static_cast<int>(i));

  Rng rng(seed);
  std::vector<int> train_idx, test_idx;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    if (idx.size() < 2)
      throw EmptyClass("class " + to_string(static_cast<SliceClass>(c)) +
                       " has fewer than 2 samples");
    rng.shuffle(idx);
    int n_train = static_cast<int>(std::lround(train_ratio * idx.size()));
    n_train = std::clamp(n_train, 1, static_cast<int>(idx.size()) - 1);
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + n_train);
    test_idx.insert(test_idx.end(), idx.begin() + n_train, idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::pair<std::vector<FeatureVector>, std::vector<FeatureVector>> out;
  for (int i : train_idx) out.first.push_back(data[i]);
  for (int i : test_idx) out.second.push_back(data[i]);
  return out;
}

RandomForestModel train_forest(const std::vector<FeatureVector>& train,
                               const ForestHyper& hyper, int n_threads) {
  if (train.empty()) throw EmptyClass("empty training set");
  if (hyper.n_trees < 1 || hyper.min_samples_split < 2)
    throw UsageError("invalid forest hyperparameters");
  const int d = static_cast<int>(train.front().values.size());
  std::vector<const FeatureVector*> data;
  data.reserve(train.size());
  for (const auto& f : train) {
    if (static_cast<int>(f.values.size()) != d)
      throw DimensionMismatch("training vectors disagree on feature length");
    label_of(f);
    data.push_back(&f);
  }
  int mtry = hyper.features_per_split;
  if (mtry <= 0) mtry = std::max(1, static_cast<int>(std::floor(std::sqrt(d))));
  mtry = std::min(mtry, d);

  RandomForestModel model;
  model.hyper = hyper;
  model.feature_dim = d;
  model.trees.resize(hyper.n_trees);
  parallel_for(static_cast<std::size_t>(hyper.n_trees), n_threads, [&](std::size_t i) {
    model.trees[i] = build_tree(data, hyper, d, mtry, i);
  });
  return model;
}

SliceClass predict_class(const RandomForestModel& model, const FeatureVector& f) {
  if (static_cast<int>(f.values.size()) != model.feature_dim)
    throw DimensionMismatch("feature length " + std::to_string(f.values.size()) +
                            " does not match model dimension " +
                            std::to_string(model.feature_dim));
  std::array<int, kNumClasses> votes{};
  for (const auto& t : model.trees) ++votes[static_cast<int>(t.predict(f.values))];
  return static_cast<SliceClass>(argmax_class(votes));
}

CvReport cross_validate(const std::vector<FeatureVector>& data, int k,
                        const ForestHyper& hyper, int n_threads) {
  if (k < 2) throw UsageError("k must be >= 2");
  std::array<std::vector<int>, kNumClasses> by_class;
  for (std::size_t i = 0; i < data.size(); ++i)
    by_class[label_of(data[i])].push_back(static_cast<int>(i));
  for (int c = 0; c < kNumClasses; ++c)
    if (!by_class[c].empty() && static_cast<int>(by_class[c].size()) < k)
      throw TooFewSamples("class " + to_string(static_cast<SliceClass>(c)) +
                          " has fewer samples than folds");

  // stratified assignment: shuffle within class, deal round-robin
  Rng rng = Rng::derive(hyper.seed, 0x0f01d);
  std::vector<int> fold_of(data.size(), 0);
  for (int c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[c];
    rng.shuffle(idx);
    for (std::size_t j = 0; j < idx.size(); ++j) fold_of[idx[j]] = static_cast<int>(j % k);
  }

  CvReport report;
  for (int fold = 0; fold < k; ++fold) {
    std::vector<FeatureVector> train, test;
    for (std::size_t i = 0; i < data.size(); ++i)
      (fold_of[i] == fold ? test : train).push_back(data[i]);
    if (train.empty() || test.empty()) throw TooFewSamples("fold without data");
    ForestHyper fold_hyper = hyper;
    fold_hyper.seed = Rng::derive(hyper.seed, 0xcf01d + static_cast<std::uint64_t>(fold)).next();
    RandomForestModel model = train_forest(train, fold_hyper, n_threads);
    int correct = 0;
    for (const auto& f : test)
      if (predict_class(model, f) == *f.label) ++correct;
    report.fold_accuracies.push_back(static_cast<double>(correct) / test.size());
  }
  report.mean_accuracy = 0.0;
  for (double a : report.fold_accuracies) report.mean_accuracy += a;
  report.mean_accuracy /= report.fold_accuracies.size();
  return report;
}

std::array<ClassScores, kNumClasses> classification_report(
    const std::vector<SliceClass>& pred, const std::vector<SliceClass>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw LengthMismatch("prediction/truth length mismatch or empty");
  std::array<int, kNumClasses> tp{}, fp{}, fn{};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int p = static_cast<int>(pred[i]), t = static_cast<int>(truth[i]);
    if (p == t)
      ++tp[p];
    else {
      ++fp[p];
      ++fn[t];
    }
  }
  std::array<ClassScores, kNumClasses> out;
  for (int c = 0; c < kNumClasses; ++c) {
    ClassScores& s = out[c];
    s.precision = tp[c] + fp[c] > 0 ? static_cast<double>(tp[c]) / (tp[c] + fp[c]) : 0.0;
    s.recall = tp[c] + fn[c] > 0 ? static_cast<double>(tp[c]) / (tp[c] + fn[c]) : 0.0;
    s.f1 = s.precision + s.recall > 0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
  }
  return out;
}

void save_model(const RandomForestModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot create " + path);
  out << "lvseg-forest v1\n";
  out << "feature_dim " << model.feature_dim << "\n";
  const auto& h = model.hyper;
  out << "hyper " << h.n_trees << " " << h.max_depth << " " << h.min_samples_split << " "
      << h.features_per_split << " " << (h.bootstrap ? 1 : 0) << " " << h.seed << "\n";
  out << "trees " << model.trees.size() << "\n";
  char buf[40];
  for (const auto& t : model.trees) {
    out << "tree " << t.nodes.size() << "\n";
    for (const auto& n : t.nodes) {
      if (n.feature >= 0) {
        std::snprintf(buf, sizeof buf, "%.17g", n.threshold);
        out << "s " << n.feature << " " << buf << " " << n.left << " " << n.right << "\n";
      } else {
        out << "l " << n.counts[0] << " " << n.counts[1] << " " << n.counts[2] << "\n";
      }
    }
  }
  if (!out) throw IoFailure("write failed for " + path);
}

RandomForestModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "lvseg-forest v1")
    throw MalformedHeader("not a lvseg-forest v1 file: " + path);
  RandomForestModel model;
  std::string word;
  std::size_t n_trees = 0;
  in >> word >> model.feature_dim;
  int bootstrap = 1;
  in >> word >> model.hyper.n_trees >> model.hyper.max_depth >> model.hyper.min_samples_split >>
      model.hyper.features_per_split >> bootstrap >> model.hyper.seed;
  model.hyper.bootstrap = bootstrap != 0;
  in >> word >> n_trees;
  if (!in || word != "trees") throw MalformedHeader("corrupt model header in " + path);
  model.trees.resize(n_trees);
  for (auto& t : model.trees) {
    std::size_t n_nodes = 0;
    in >> word >> n_nodes;
    if (!in || word != "tree") throw MalformedHeader("corrupt tree header in " + path);
    t.nodes.resize(n_nodes);
    for (auto& n : t.nodes) {
      in >> word;
      if (word == "s") {
        in >> n.feature >> n.threshold >> n.left >> n.right;
        if (n.feature < 0 || n.feature >= model.feature_dim)
          throw MalformedHeader("node feature out of range in " + path);
      } else if (word == "l") {
        n.feature = -1;
        in >> n.counts[0] >> n.counts[1] >> n.counts[2];
      } else {
        throw MalformedHeader("unknown node tag '" + word + "' in " + path);
      }
    }
  }
  if (!in) throw MalformedHeader("truncated model file " + path);
  return model;
}

}  // namespace lvseg
