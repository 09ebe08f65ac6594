#ifndef LVSEG_CLASSIFIER_HPP
#define LVSEG_CLASSIFIER_HPP

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lvseg/features.hpp"
#include "lvseg/slice_class.hpp"

namespace lvseg {

struct ForestHyper {
  int n_trees = 100;
  int max_depth = 0;           // 0 = unbounded
  int min_samples_split = 2;
  int features_per_split = 0;  // 0 = floor(sqrt(feature_dim))
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

/// Flat node array; feature < 0 marks a leaf carrying class counts.
struct DecisionTree {
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::array<int, kNumClasses> counts{};
  };
  std::vector<Node> nodes;

  SliceClass predict(const std::vector<double>& x) const;
};

struct RandomForestModel {
  std::vector<DecisionTree> trees;
  ForestHyper hyper;
  int feature_dim = 0;
};

struct CvReport {
  std::vector<double> fold_accuracies;
  double mean_accuracy = 0.0;
};

struct ClassScores {
  double precision = 0, recall = 0, f1 = 0;
};

/// Per-class seeded stratified split. Train gets round(ratio * count) of each
/// class, clamped so both sides stay nonempty; the same seed always yields the
/// same partition.
std::pair<std::vector<FeatureVector>, std::vector<FeatureVector>> stratified_split(
    const std::vector<FeatureVector>& data, double train_ratio, std::uint64_t seed);

/// Gini-split forest. Tree i draws its bootstrap sample and per-node feature
/// subsets from a stream derived from (hyper.seed, i), so the model is
/// identical for any thread count.
RandomForestModel train_forest(const std::vector<FeatureVector>& train,
                               const ForestHyper& hyper, int n_threads = 1);

/// Majority vote; ties resolved by class order (Basal < Mid < Apical).
SliceClass predict_class(const RandomForestModel& model, const FeatureVector& f);

CvReport cross_validate(const std::vector<FeatureVector>& data, int k,
                        const ForestHyper& hyper, int n_threads = 1);

/// Index 0/1/2 = Basal/Mid/Apical. Classes absent from both pred and truth
/// report zeros.
std::array<ClassScores, kNumClasses> classification_report(
    const std::vector<SliceClass>& pred, const std::vector<SliceClass>& truth);

void save_model(const RandomForestModel& model, const std::string& path);
RandomForestModel load_model(const std::string& path);

}  // namespace lvseg

#endif
