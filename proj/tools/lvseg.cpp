// lvseg: two-phase left-ventricle segmentation for short-axis cardiac MR.
// Phase 1 classifies slices (DAISY features + slice-position index + random
// forest); phase 2 seeds a mask and evolves a local-Gaussian active contour
// with per-class parameter sets.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <tuple>

#include "lvseg/classifier.hpp"
#include "lvseg/errors.hpp"
#include "lvseg/kernels.hpp"
#include "lvseg/parallel.hpp"
#include "lvseg/phantom.hpp"
#include "lvseg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace lvseg;

namespace {

PipelineConfig config_from(const std::string& path) {
  return path.empty() ? PipelineConfig{} : load_config(path);
}

int run_synth(const PhantomSpec& base, int cases, const std::string& out,
              const std::string& format) {
  fs::create_directories(out);
  for (int i = 0; i < cases; ++i) {
    PhantomSpec spec = base;
    spec.seed = base.seed + static_cast<std::uint64_t>(i);
    const PhantomStudy study = generate_phantom_study(spec);
    char name[64];
    std::snprintf(name, sizeof name, "case_%04llu",
                  static_cast<unsigned long long>(spec.seed));
    CmrVolume named = study.volume;
    named.case_id = name;
    if (format == "nifti") {
      write_volume_nifti(named, (fs::path(out) / (std::string(name) + ".nii")).string());
      CmrVolume gt = named;
      gt.case_id = std::string(name) + "_gt";
      for (int s = 0; s < gt.n_slices; ++s)
        for (int r = 0; r < gt.rows; ++r)
          for (int c = 0; c < gt.cols; ++c)
            gt.voxel(r, c, s) = study.ground_truth[s].pixels(r, c) ? 3.0 : 0.0;
      write_volume_nifti(gt, (fs::path(out) / (std::string(name) + "_gt.nii")).string());
    } else {
      write_slice_directory(named, study.ground_truth, study.classes,
                            (fs::path(out) / name).string());
    }
  }
  std::cout << "wrote " << cases << " case(s) under " << out << "\n";
  return 0;
}

int run_label(const std::string& in, int every, const std::string& out) {
  if (every < 1) throw UsageError("--every must be >= 1");
  const auto paths = discover_cases(in);
  if (paths.empty()) throw EmptyStudy("no cases found under " + in);
  std::ofstream csv(out);
  if (!csv) throw IoFailure("cannot create " + out);
  csv << "case_id,p,class\n";
  int picked = 0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (i % static_cast<std::size_t>(every) != 0) continue;
    ++picked;
    CmrVolume volume = load_volume(paths[i]);
    std::optional<std::vector<SliceClass>> classes;
    if (fs::is_directory(paths[i])) classes = load_manifest_classes(paths[i]);
    for (int s = 0; s < volume.n_slices; ++s)
      csv << volume.case_id << ',' << (s + 1) << ','
          << (classes ? to_string((*classes)[s]) : "") << '\n';
  }
  std::cout << "labeled pool: " << picked << " of " << paths.size() << " cases -> " << out
            << "\n";
  return 0;
}

int run_featurize(const std::string& in, const std::string& labels_csv,
                  const std::string& out, const PipelineConfig& cfg) {
  const auto paths = discover_cases(in);
  if (paths.empty()) throw EmptyStudy("no cases found under " + in);
  std::map<std::string, std::vector<SliceClass>> labels;
  if (!labels_csv.empty()) labels = read_classes_csv(labels_csv);

  std::vector<std::vector<FeatureVector>> per_case(paths.size());
  parallel_for(paths.size(), cfg.threads, [&](std::size_t i) {
    StudyCase c = load_case(paths[i], cfg, false);
    const std::vector<SliceClass>* lab = nullptr;
    if (!labels_csv.empty()) {
      auto it = labels.find(c.case_id);
      if (it != labels.end()) lab = &it->second;
    } else if (!c.true_classes.empty()) {
      lab = &c.true_classes;
    }
    for (std::size_t s = 0; s < c.slices.size(); ++s) {
      FeatureVector f = build_feature_vector(c.slices[s], cfg.daisy);
      if (lab && s < lab->size()) f.label = (*lab)[s];
      per_case[i].push_back(std::move(f));
    }
  });
  std::vector<FeatureVector> rows;
  for (auto& v : per_case)
    for (auto& f : v) rows.push_back(std::move(f));
  write_feature_csv(out, rows);
  std::cout << "wrote " << rows.size() << " feature rows -> " << out << "\n";
  return 0;
}

std::vector<FeatureVector> labeled_rows(const std::string& features_csv) {
  auto rows = read_feature_csv(features_csv);
  std::vector<FeatureVector> labeled;
  for (auto& f : rows)
    if (f.label) labeled.push_back(std::move(f));
  if (labeled.empty()) throw EmptyClass("no labeled rows in " + features_csv);
  return labeled;
}

int run_evaluate(const std::string& eval_pred, const std::string& eval_gt,
                 const std::string& eval_out) {
  auto list_masks = [](const fs::path& dir, bool prefer_gt) {
    std::vector<std::string> files;
    const char* prefer = prefer_gt ? "gt_" : "mask_";
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".pgm" &&
          e.path().filename().string().rfind(prefer, 0) == 0)
        files.push_back(e.path().string());
    if (files.empty())
      for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".pgm") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    return files;
  };
  auto to_mask = [](const std::string& path) {
    const auto img = read_pgm(path);
    Mask m(img.rows(), img.cols());
    for (std::size_t i = 0; i < img.size(); ++i) m.data()[i] = img.data()[i] > 0;
    return m;
  };
  std::vector<std::pair<std::string, fs::path>> cases;
  for (const auto& e : fs::directory_iterator(eval_pred))
    if (e.is_directory()) cases.push_back({e.path().filename().string(), e.path()});
  std::sort(cases.begin(), cases.end());
  if (cases.empty()) cases.push_back({".", eval_pred});

  std::ofstream out(eval_out);
  if (!out) throw IoFailure("cannot create " + eval_out);
  out << "case_id,index,dice,jaccard,precision,recall,f1,accuracy,specificity,mae,"
         "hausdorff,mad,bde\n";
  int n_pairs = 0;
  for (const auto& [name, pred_dir] : cases) {
    const fs::path gt_dir = name == "." ? fs::path(eval_gt) : fs::path(eval_gt) / name;
    if (!fs::is_directory(gt_dir))
      throw IoFailure("no matching ground-truth directory for case " + name);
    const auto preds = list_masks(pred_dir, false);
    const auto gts = list_masks(gt_dir, true);
    if (preds.size() != gts.size())
      throw ShapeMismatch("mask counts differ for case " + name);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      Mask p = to_mask(preds[i]);
      Mask g = to_mask(gts[i]);
      if (p.rows() != g.rows() || p.cols() != g.cols())
        g = resize_nearest(g, p.rows(), p.cols());
      const MetricReport m = evaluate_masks(p, g);
      char buf[512];
      std::snprintf(buf, sizeof buf,
                    "%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                    name.c_str(), i + 1, m.dice, m.jaccard, m.precision, m.recall, m.f1,
                    m.accuracy, m.specificity, m.mae, m.hausdorff, m.mad, m.bde);
      out << buf;
      ++n_pairs;
    }
  }
  std::cout << "evaluated " << n_pairs << " mask pairs -> " << eval_out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-phase left-ventricle segmentation (classify, then contour)"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate synthetic studies with ground truth");
  PhantomSpec spec;
  int synth_cases = 1;
  std::string synth_out, synth_format = "dir";
  std::uint64_t synth_seed = 1;
  synth->add_option("--cases", synth_cases, "number of cases")->default_val(1);
  synth->add_option("--slices", spec.n_slices, "slices per case")->default_val(8);
  synth->add_option("--seed", synth_seed, "base seed (case i uses seed+i)")->default_val(1);
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  synth->add_option("--rows", spec.rows)->default_val(200);
  synth->add_option("--cols", spec.cols)->default_val(200);
  synth->add_option("--noise", spec.noise_sigma, "additive Gaussian noise std")
      ->default_val(8.0);
  synth->add_option("--basal-frac", spec.basal_fraction)->default_val(0.3);
  synth->add_option("--mid-frac", spec.mid_fraction)->default_val(0.4);
  synth->add_option("--apical-frac", spec.apical_fraction)->default_val(0.3);
  synth->add_option("--cavity", spec.cavity_intensity)->default_val(200.0);
  synth->add_option("--myocardium", spec.myocardium_intensity)->default_val(30.0);
  synth->add_option("--background", spec.background_intensity)->default_val(60.0);
  synth->add_option("--format", synth_format, "dir|nifti")
      ->check(CLI::IsMember({"dir", "nifti"}))
      ->default_val("dir");

  auto* label = app.add_subcommand("label", "select every Nth case for the labeled pool");
  std::string label_in, label_out;
  int label_every = 5;
  label->add_option("--every", label_every, "subsampling stride")->default_val(5);
  label->add_option("--in", label_in, "dataset directory")->required();
  label->add_option("--out", label_out, "labels CSV")->required();

  auto* feat = app.add_subcommand("featurize", "extract feature vectors to CSV");
  std::string feat_in, feat_labels, feat_out, feat_config;
  feat->add_option("--in", feat_in, "dataset directory")->required();
  feat->add_option("--labels", feat_labels, "labels CSV (default: manifest classes)");
  feat->add_option("--out", feat_out, "feature CSV")->required();
  feat->add_option("--config", feat_config, "config file");

  auto* train = app.add_subcommand("train", "train the slice classifier");
  std::string train_features, train_out;
  ForestHyper train_hyper;
  bool train_no_bootstrap = false;
  int train_threads = 1;
  train->add_option("--features", train_features, "feature CSV")->required();
  train->add_option("--trees", train_hyper.n_trees)->default_val(100);
  train->add_option("--max-depth", train_hyper.max_depth, "0 = unbounded")->default_val(0);
  train->add_option("--min-samples-split", train_hyper.min_samples_split)->default_val(2);
  train->add_option("--features-per-split", train_hyper.features_per_split,
                    "0 = floor(sqrt(d))")
      ->default_val(0);
  train->add_flag("--no-bootstrap", train_no_bootstrap, "disable bootstrap resampling");
  train->add_option("--seed", train_hyper.seed)->default_val(0);
  train->add_option("--threads", train_threads)->default_val(1);
  train->add_option("--out", train_out, "model file")->required();

  auto* cv = app.add_subcommand("cross-validate", "stratified k-fold accuracy");
  std::string cv_features;
  int cv_k = 10;
  ForestHyper cv_hyper;
  int cv_threads = 1;
  cv->add_option("--features", cv_features, "feature CSV")->required();
  cv->add_option("--k", cv_k)->default_val(10);
  cv->add_option("--seed", cv_hyper.seed)->default_val(0);
  cv->add_option("--trees", cv_hyper.n_trees)->default_val(100);
  cv->add_option("--threads", cv_threads)->default_val(1);

  auto* classify = app.add_subcommand("classify", "predict slice classes for a dataset");
  std::string cls_model, cls_in, cls_out, cls_config;
  classify->add_option("--model", cls_model, "trained model")->required();
  classify->add_option("--in", cls_in, "dataset directory")->required();
  classify->add_option("--out", cls_out, "classes CSV")->required();
  classify->add_option("--config", cls_config, "config file");

  auto* segment = app.add_subcommand("segment", "phase-2 segmentation study");
  std::string seg_in, seg_classes, seg_config, seg_out;
  bool seg_gt = false, seg_ablation = false, seg_dump = false;
  int seg_threads = 0;
  segment->add_option("--in", seg_in, "dataset directory")->required();
  segment->add_option("--classes", seg_classes, "classes CSV from `classify`");
  segment->add_flag("--gt", seg_gt, "evaluate against ground truth");
  segment->add_flag("--ablation", seg_ablation, "add uniform parameter-set rows");
  segment->add_flag("--dump-masks", seg_dump, "write PGM masks and overlays");
  segment->add_option("--config", seg_config, "config file (defaults when omitted)");
  segment->add_option("--out", seg_out, "report directory")->required();
  segment->add_option("--threads", seg_threads, "override config worker threads")
      ->default_val(0);

  auto* tune = app.add_subcommand("tune", "grid-search per-class solver parameters");
  std::string tune_in, tune_grid, tune_out, tune_config;
  bool tune_gt = false;
  tune->add_option("--in", tune_in, "labeled dataset directory")->required();
  tune->add_flag("--gt", tune_gt, "require ground truth (always enforced)");
  tune->add_option("--grid", tune_grid, "grid file: class.param=v1,v2,...")->required();
  tune->add_option("--out", tune_out, "registry output")->required();
  tune->add_option("--config", tune_config, "config file");

  auto* evaluate = app.add_subcommand("evaluate", "compare two mask directories");
  std::string eval_pred, eval_gt, eval_out;
  evaluate->add_option("--pred", eval_pred, "predicted masks directory")->required();
  evaluate->add_option("--gt", eval_gt, "ground-truth masks directory")->required();
  evaluate->add_option("--out", eval_out, "report CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage error
  }

  try {
    if (*synth) {
      spec.seed = synth_seed;
      return run_synth(spec, synth_cases, synth_out, synth_format);
    }
    if (*label) return run_label(label_in, label_every, label_out);
    if (*feat) return run_featurize(feat_in, feat_labels, feat_out, config_from(feat_config));
    if (*train) {
      train_hyper.bootstrap = !train_no_bootstrap;
      auto rows = labeled_rows(train_features);
      auto model = train_forest(rows, train_hyper, train_threads);
      save_model(model, train_out);
      std::cout << "trained " << model.trees.size() << " trees on " << rows.size()
                << " samples (dim " << model.feature_dim << ") -> " << train_out << "\n";
      return 0;
    }
    if (*cv) {
      auto rows = labeled_rows(cv_features);
      auto report = cross_validate(rows, cv_k, cv_hyper, cv_threads);
      for (std::size_t i = 0; i < report.fold_accuracies.size(); ++i)
        std::printf("fold %zu: %.4f\n", i + 1, report.fold_accuracies[i]);
      std::printf("mean accuracy: %.4f\n", report.mean_accuracy);
      return 0;
    }
    if (*classify) {
      PipelineConfig cfg = config_from(cls_config);
      auto model = load_model(cls_model);
      const auto paths = discover_cases(cls_in);
      if (paths.empty()) throw EmptyStudy("no cases found under " + cls_in);
      std::vector<std::vector<std::tuple<std::string, int, SliceClass>>> rows(paths.size());
      parallel_for(paths.size(), cfg.threads, [&](std::size_t i) {
        CmrVolume volume = load_volume(paths[i]);
        auto classes = run_phase1(volume, model, cfg);
        for (std::size_t s = 0; s < classes.size(); ++s)
          rows[i].push_back({volume.case_id, static_cast<int>(s) + 1, classes[s]});
      });
      std::vector<std::tuple<std::string, int, SliceClass>> flat;
      for (auto& r : rows)
        for (auto& t : r) flat.push_back(std::move(t));
      write_classes_csv(cls_out, flat);
      std::cout << "classified " << flat.size() << " slices -> " << cls_out << "\n";
      return 0;
    }
    if (*segment) {
      PipelineConfig cfg = config_from(seg_config);
      if (seg_threads > 0) cfg.threads = seg_threads;
      StudyOptions opt;
      opt.with_gt = seg_gt;
      opt.ablation = seg_ablation;
      opt.dump_masks = seg_dump;
      opt.classes_csv = seg_classes;
      opt.out_dir = seg_out;
      StudyReport report = run_study(seg_in, cfg, opt);
      const StudyRow& row = report.rows[0];
      std::printf("cases: %zu, slices: %d, undetected: %d, solver failures: %d\n",
                  row.cases.size(), row.total_slices, row.not_found, row.solver_failures);
      if (seg_gt && row.overall.n_slices > 0)
        std::printf("overall dice: %.4f over %d evaluated slices\n", row.overall.mean.dice,
                    row.overall.n_slices);
      std::cout << "report written to " << seg_out << "\n";
      return 0;
    }
    if (*tune) {
      PipelineConfig cfg = config_from(tune_config);
      auto grids = parse_grid_file(tune_grid);
      auto result = grid_search_params(tune_in, grids, cfg);
      save_registry(result, tune_out);
      const char* names[3] = {"basal", "mid", "apical"};
      for (int c = 0; c < kNumClasses; ++c) {
        const LgdParams& p = result.registry.for_class(static_cast<SliceClass>(c));
        std::printf("%s: lambda1=%g lambda2=%g nu=%g shrink=%g mean dice %.4f%s\n", names[c],
                    p.lambda1, p.lambda2, p.nu, result.shrink_targets[c], result.mean_dice[c],
                    result.searched[c] ? "" : " (defaults kept)");
      }
      std::cout << "registry written to " << tune_out << "\n";
      return 0;
    }
    if (*evaluate) return run_evaluate(eval_pred, eval_gt, eval_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
