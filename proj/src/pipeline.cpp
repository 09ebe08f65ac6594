#include "lvseg/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "lvseg/errors.hpp"
#include "lvseg/parallel.hpp"

namespace fs = std::filesystem;

namespace lvseg {

namespace {

// ---------- config serialization ----------

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt_double(v[i]);
  }
  return out;
}

double parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("bad numeric value '" + s + "' in config");
  }
}

long long parse_int(const std::string& s) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("bad integer value '" + s + "' in config");
  }
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    out.push_back(parse_double(s.substr(pos, comma - pos)));
    pos = comma + 1;
    if (comma == s.size()) break;
  }
  return out;
}

struct KeyIO {
  std::string key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

std::vector<KeyIO> config_schema() {
  std::vector<KeyIO> keys;
  auto add = [&](std::string key, auto getter, auto setter) {
    keys.push_back({std::move(key), getter, setter});
  };

#define KEY_INT(NAME, FIELD)                                                     \
  add(NAME, [](const PipelineConfig& c) { return std::to_string(c.FIELD); },     \
      [](PipelineConfig& c, const std::string& v) {                              \
        c.FIELD = static_cast<decltype(c.FIELD)>(parse_int(v));                  \
      })
#define KEY_DBL(NAME, FIELD)                                                     \
  add(NAME, [](const PipelineConfig& c) { return fmt_double(c.FIELD); },         \
      [](PipelineConfig& c, const std::string& v) { c.FIELD = parse_double(v); })
#define KEY_VEC(NAME, FIELD)                                                     \
  add(NAME, [](const PipelineConfig& c) { return fmt_doubles(c.FIELD); },        \
      [](PipelineConfig& c, const std::string& v) { c.FIELD = parse_doubles(v); })

  KEY_INT("seed", seed);
  KEY_INT("lv_label", lv_label);
  KEY_INT("working_rows", working_rows);
  KEY_INT("working_cols", working_cols);
  KEY_INT("threads", threads);
  KEY_INT("use_true_classes", use_true_classes);
  KEY_INT("daisy.step", daisy.step);
  KEY_INT("daisy.radius", daisy.radius);
  KEY_INT("daisy.rings", daisy.rings);
  KEY_INT("daisy.histograms_per_ring", daisy.histograms_per_ring);
  KEY_INT("daisy.orientations", daisy.orientations);
  KEY_VEC("daisy.sigmas", daisy.gaussian_sigmas);
  KEY_INT("forest.trees", forest.n_trees);
  KEY_INT("forest.max_depth", forest.max_depth);
  KEY_INT("forest.min_samples_split", forest.min_samples_split);
  KEY_INT("forest.features_per_split", forest.features_per_split);
  KEY_INT("forest.bootstrap", forest.bootstrap);
  KEY_INT("forest.seed", forest.seed);
  KEY_VEC("maskgen.betas", maskgen.beta_schedule);
  KEY_VEC("maskgen.quantiles", maskgen.threshold_quantiles);
  KEY_INT("maskgen.area_min", maskgen.area_min);
  KEY_INT("maskgen.area_max", maskgen.area_max);
  KEY_DBL("maskgen.w_circularity", maskgen.w_circularity);
  KEY_DBL("maskgen.w_center", maskgen.w_center);
  KEY_DBL("maskgen.w_prev", maskgen.w_prev);
  KEY_DBL("maskgen.max_pair_distance", maskgen.max_pair_distance);
  KEY_INT("maskgen.beam", maskgen.beam);
  KEY_DBL("maskgen.shrink_target.basal", maskgen.shrink_target_basal);
  KEY_DBL("maskgen.shrink_target.mid", maskgen.shrink_target_mid);
  KEY_INT("maskgen.apical_area_limit", maskgen.apical_area_limit);

  const char* class_names[3] = {"basal", "mid", "apical"};
  for (int i = 0; i < kNumClasses; ++i) {
    const std::string prefix = std::string("params.") + class_names[i] + ".";
    auto p = [i](PipelineConfig& c) -> LgdParams& {
      return c.registry.for_class(static_cast<SliceClass>(i));
    };
    auto pc = [i](const PipelineConfig& c) -> const LgdParams& {
      return c.registry.for_class(static_cast<SliceClass>(i));
    };
#define PKEY_DBL(NAME, FIELD)                                                        \
  add(prefix + NAME, [pc](const PipelineConfig& c) { return fmt_double(pc(c).FIELD); }, \
      [p](PipelineConfig& c, const std::string& v) { p(c).FIELD = parse_double(v); })
#define PKEY_INT(NAME, FIELD)                                                        \
  add(prefix + NAME,                                                                 \
      [pc](const PipelineConfig& c) { return std::to_string(pc(c).FIELD); },         \
      [p](PipelineConfig& c, const std::string& v) {                                 \
        p(c).FIELD = static_cast<decltype(LgdParams{}.FIELD)>(parse_int(v));         \
      })
    PKEY_DBL("tau", tau);
    PKEY_DBL("lambda1", lambda1);
    PKEY_DBL("lambda2", lambda2);
    PKEY_DBL("nu", nu);
    PKEY_DBL("mu", mu);
    PKEY_DBL("epsilon", epsilon);
    PKEY_DBL("kernel_sigma", kernel_sigma);
    PKEY_DBL("sigma_floor", sigma_floor);
    PKEY_INT("iterations", iterations);
    PKEY_INT("adaptive", adaptive_iterations);
    PKEY_DBL("iter_gain", iter_gain);
    PKEY_INT("iter_min", iter_min);
    PKEY_INT("iter_max", iter_max);
    PKEY_DBL("init_height", init_height);
#undef PKEY_DBL
#undef PKEY_INT
  }
#undef KEY_INT
#undef KEY_DBL
#undef KEY_VEC
  return keys;
}

const std::vector<KeyIO>& schema() {
  static const std::vector<KeyIO> s = config_schema();
  return s;
}

std::string class_letter(SliceClass cls) {
  switch (cls) {
    case SliceClass::Basal:
      return "A";
    case SliceClass::MidVentricle:
      return "B";
    default:
      return "C";
  }
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(lineno) + " has no '='");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    bool found = false;
    for (const auto& k : schema()) {
      if (k.key == key) {
        k.set(cfg, value);
        found = true;
        break;
      }
    }
    if (!found) throw UsageError("unknown config key '" + key + "'");
  }
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const PipelineConfig& cfg) {
  std::string out = "# lvseg run configuration\n";
  for (const auto& k : schema()) out += k.key + "=" + k.get(cfg) + "\n";
  return out;
}

void save_config(const PipelineConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot create " + path);
  out << serialize_config(cfg);
  if (!out) throw IoFailure("write failed for " + path);
}

// ---------- case loading ----------

std::vector<std::string> discover_cases(const std::string& dataset_dir) {
  if (!fs::is_directory(dataset_dir)) throw IoFailure("not a directory: " + dataset_dir);
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dataset_dir)) {
    const std::string path = entry.path().string();
    if (entry.is_directory()) {
      if (fs::exists(entry.path() / "manifest.txt")) out.push_back(path);
    } else if (ends_with(path, ".nii") || ends_with(path, ".nii.gz")) {
      if (path.find("_gt.nii") == std::string::npos) out.push_back(path);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

StudyCase load_case(const std::string& path, const PipelineConfig& cfg, bool want_gt) {
  StudyCase c;
  c.path = path;
  CmrVolume volume = load_volume(path);
  c.case_id = volume.case_id;
  c.slices = extract_slices(volume);
  for (auto& s : c.slices) s = resize_bilinear(s, cfg.working_rows, cfg.working_cols);

  if (fs::is_directory(path)) {
    if (auto classes = load_manifest_classes(path)) c.true_classes = *classes;
    if (want_gt) {
      bool has_gt = fs::exists(fs::path(path) / "gt_001.pgm");
      if (has_gt) c.gt = load_ground_truth(path, cfg.lv_label);
    }
  } else if (want_gt) {
    std::string gt_path;
    for (const char* suffix : {".nii", ".nii.gz"}) {
      std::string stem = path;
      if (ends_with(stem, ".nii.gz"))
        stem.resize(stem.size() - 7);
      else if (ends_with(stem, ".nii"))
        stem.resize(stem.size() - 4);
      const std::string candidate = stem + "_gt" + suffix;
      if (fs::exists(candidate)) {
        gt_path = candidate;
        break;
      }
    }
    if (!gt_path.empty()) c.gt = load_ground_truth(gt_path, cfg.lv_label);
  }

  if (!c.gt.empty()) {
    if (c.gt.size() != c.slices.size())
      throw ShapeMismatch("ground truth slice count differs for " + c.case_id);
    for (auto& g : c.gt) g.pixels = resize_nearest(g.pixels, cfg.working_rows, cfg.working_cols);
  }
  return c;
}

std::vector<SliceClass> run_phase1(const CmrVolume& volume, const RandomForestModel& model,
                                   const PipelineConfig& cfg) {
  const int expected = cfg.daisy.feature_length(cfg.working_rows, cfg.working_cols);
  if (expected != model.feature_dim)
    throw DimensionMismatch("model dimension " + std::to_string(model.feature_dim) +
                            " does not match the configured features (" +
                            std::to_string(expected) + ")");
  auto slices = extract_slices(volume);
  std::vector<SliceClass> out(slices.size(), SliceClass::Basal);
  parallel_for(slices.size(), cfg.threads, [&](std::size_t i) {
    auto resized = resize_bilinear(slices[i], cfg.working_rows, cfg.working_cols);
    out[i] = predict_class(model, build_feature_vector(resized, cfg.daisy));
  });
  return out;
}

// ---------- phase 2 ----------

CaseSeeds compute_case_seeds(const StudyCase& c, const PipelineConfig& cfg) {
  CaseSeeds seeds;
  const std::size_t n = c.slices.size();
  seeds.selections.resize(n);
  std::optional<std::pair<double, double>> prev;
  std::size_t start = 0;
  if (n >= 3) {
    std::vector<SliceImage> first(c.slices.begin(), c.slices.begin() + 3);
    SeedTriple triple = sequential_seed_masks(first, cfg.maskgen);
    seeds.triple_consistent = triple.consistent;
    for (int i = 0; i < 3; ++i) {
      seeds.selections[i] = triple.masks[i];
      if (triple.masks[i])
        prev = std::make_pair(triple.masks[i]->props.centroid_r,
                              triple.masks[i]->props.centroid_c);
    }
    start = 3;
  }
  for (std::size_t i = start; i < n; ++i) {
    seeds.selections[i] = select_lv_mask(c.slices[i], prev, cfg.maskgen);
    if (seeds.selections[i])
      prev = std::make_pair(seeds.selections[i]->props.centroid_r,
                            seeds.selections[i]->props.centroid_c);
  }
  return seeds;
}

CaseResult run_phase2_with_seeds(const StudyCase& c, const std::vector<SliceClass>& classes,
                                 const CaseSeeds& seeds, const ParameterRegistry& registry,
                                 const PipelineConfig& cfg) {
  if (classes.size() != c.slices.size())
    throw LengthMismatch("class list length does not match the slice count of " + c.case_id);
  CaseResult result;
  result.case_id = c.case_id;
  result.slices.resize(c.slices.size());
  for (std::size_t i = 0; i < c.slices.size(); ++i) {
    SliceOutcome& o = result.slices[i];
    o.p = c.slices[i].p;
    o.class_used = classes[i];
    if (i < c.true_classes.size()) o.true_class = c.true_classes[i];
    o.set_name = class_letter(classes[i]);
    if (!seeds.selections[i]) {
      o.not_found = true;
      continue;
    }
    Mask seed = shrink_mask(seeds.selections[i]->mask, classes[i], cfg.maskgen);
    try {
      SegmentationResult seg = segment_slice(c.slices[i], seed, classes[i], registry);
      o.iterations_run = seg.iterations_run;
      o.initial_energy = seg.initial_energy;
      o.final_energy = seg.final_energy;
      o.mask = std::move(seg.mask);
    } catch (const NonFiniteField&) {
      o.solver_failed = true;
      continue;
    }
    if (!c.gt.empty()) o.metrics = evaluate_masks(o.mask, c.gt[i].pixels);
  }
  return result;
}

CaseResult run_phase2(const StudyCase& c, const std::vector<SliceClass>& classes,
                      const PipelineConfig& cfg) {
  return run_phase2_with_seeds(c, classes, compute_case_seeds(c, cfg), cfg.registry, cfg);
}

// ---------- study ----------

namespace {

struct MetricSums {
  double v[11] = {};
  double dist[3] = {};
  int n = 0;
  int n_dist = 0;

  void add(const MetricReport& m) {
    v[0] += m.dice;
    v[1] += m.jaccard;
    v[2] += m.precision;
    v[3] += m.recall;
    v[4] += m.f1;
    v[5] += m.accuracy;
    v[6] += m.specificity;
    v[7] += m.mae;
    ++n;
    if (m.has_distances) {
      dist[0] += m.hausdorff;
      dist[1] += m.mad;
      dist[2] += m.bde;
      ++n_dist;
    }
  }

  ClassAggregate aggregate() const {
    ClassAggregate a;
    a.n_slices = n;
    a.n_distances = n_dist;
    if (n > 0) {
      a.mean.dice = v[0] / n;
      a.mean.jaccard = v[1] / n;
      a.mean.precision = v[2] / n;
      a.mean.recall = v[3] / n;
      a.mean.f1 = v[4] / n;
      a.mean.accuracy = v[5] / n;
      a.mean.specificity = v[6] / n;
      a.mean.mae = v[7] / n;
    }
    if (n_dist > 0) {
      a.mean.hausdorff = dist[0] / n_dist;
      a.mean.mad = dist[1] / n_dist;
      a.mean.bde = dist[2] / n_dist;
      a.mean.has_distances = true;
    }
    return a;
  }
};

StudyRow aggregate_row(std::string name, std::vector<CaseResult> cases) {
  StudyRow row;
  row.name = std::move(name);
  MetricSums per_class[kNumClasses];
  MetricSums overall;
  for (const auto& cr : cases) {
    for (const auto& o : cr.slices) {
      ++row.total_slices;
      if (o.not_found) ++row.not_found;
      if (o.solver_failed) ++row.solver_failures;
      if (o.metrics) {
        const int cls = static_cast<int>(o.true_class ? *o.true_class : o.class_used);
        per_class[cls].add(*o.metrics);
        overall.add(*o.metrics);
      }
    }
  }
  for (int c = 0; c < kNumClasses; ++c) row.per_class[c] = per_class[c].aggregate();
  row.overall = overall.aggregate();
  row.cases = std::move(cases);
  return row;
}

}  // namespace

StudyReport run_study(const std::string& dataset_dir, const PipelineConfig& cfg,
                      const StudyOptions& opt) {
  const auto paths = discover_cases(dataset_dir);
  if (paths.empty()) throw EmptyStudy("no cases found under " + dataset_dir);

  std::map<std::string, std::vector<SliceClass>> class_map;
  if (!opt.classes_csv.empty()) class_map = read_classes_csv(opt.classes_csv);

  struct PerCase {
    std::vector<CaseResult> rows;  // proposed [+ A, B, C]
    bool failed = false;
    std::string error;
    std::string case_id;
  };
  std::vector<PerCase> results(paths.size());

  const std::array<ParameterRegistry, kNumClasses> uniform = {
      cfg.registry.uniform(SliceClass::Basal), cfg.registry.uniform(SliceClass::MidVentricle),
      cfg.registry.uniform(SliceClass::Apical)};

  parallel_for(paths.size(), cfg.threads, [&](std::size_t i) {
    PerCase& out = results[i];
    try {
      StudyCase c = load_case(paths[i], cfg, opt.with_gt);
      out.case_id = c.case_id;
      std::vector<SliceClass> classes;
      std::optional<std::vector<SliceClass>> predicted;
      if (cfg.use_true_classes || opt.classes_csv.empty()) {
        if (c.true_classes.empty())
          throw UsageError("no class labels available for case " + c.case_id +
                           " (provide a classes CSV or labeled manifests)");
        classes = c.true_classes;
      } else {
        auto it = class_map.find(c.case_id);
        if (it == class_map.end())
          throw UsageError("classes CSV has no rows for case " + c.case_id);
        classes = it->second;
        predicted = classes;
      }
      if (classes.size() != c.slices.size())
        throw LengthMismatch("class list length mismatch for case " + c.case_id);

      const CaseSeeds seeds = compute_case_seeds(c, cfg);
      out.rows.push_back(run_phase2_with_seeds(c, classes, seeds, cfg.registry, cfg));
      if (opt.ablation) {
        for (int u = 0; u < kNumClasses; ++u) {
          CaseResult r = run_phase2_with_seeds(c, classes, seeds, uniform[u], cfg);
          const std::string letter = class_letter(static_cast<SliceClass>(u));
          for (auto& o : r.slices) o.set_name = letter;
          out.rows.push_back(std::move(r));
        }
      }
      if (predicted)
        for (auto& row : out.rows)
          for (std::size_t s = 0; s < row.slices.size(); ++s)
            row.slices[s].predicted_class = (*predicted)[s];
    } catch (const Error& e) {
      out.failed = true;
      out.error = e.what();
      out.case_id = out.case_id.empty() ? paths[i] : out.case_id;
    }
  });

  StudyReport report;
  report.has_gt = opt.with_gt;
  const int n_rows = opt.ablation ? 1 + kNumClasses : 1;
  const char* row_names[4] = {"Proposed", "Parameter Set A", "Parameter Set B",
                              "Parameter Set C"};
  for (int r = 0; r < n_rows; ++r) {
    std::vector<CaseResult> cases;
    for (auto& pc : results) {
      if (pc.failed) {
        if (r == 0) {
          CaseResult failed;
          failed.case_id = pc.case_id;
          failed.failed = true;
          failed.error = pc.error;
          cases.push_back(std::move(failed));
        }
        continue;
      }
      cases.push_back(pc.rows[r]);
    }
    report.rows.push_back(aggregate_row(row_names[r], std::move(cases)));
  }

  if (!opt.out_dir.empty()) {
    emit_report(report, cfg, opt.out_dir);
    if (opt.dump_masks) {
      std::map<std::string, const CaseResult*> by_id;
      for (const auto& cr : report.rows[0].cases)
        if (!cr.failed) by_id[cr.case_id] = &cr;
      for (const auto& path : paths) {
        StudyCase c;
        try {
          c = load_case(path, cfg, false);
        } catch (const Error&) {
          continue;
        }
        auto it = by_id.find(c.case_id);
        if (it == by_id.end()) continue;
        const fs::path dir = fs::path(opt.out_dir) / "masks" / c.case_id;
        fs::create_directories(dir);
        for (const auto& o : it->second->slices) {
          if (o.mask.size() == 0) continue;
          char name[32];
          std::snprintf(name, sizeof name, "mask_%03d.pgm", o.p);
          write_pgm8(o.mask, (dir / name).string());
          Image overlay = c.slices[o.p - 1].pixels;
          if (mask_area(o.mask) > 0)
            for (const auto& [r, cc] : extract_boundary(o.mask)) overlay(r, cc) = 255.0;
          std::snprintf(name, sizeof name, "overlay_%03d.pgm", o.p);
          write_pgm8_image(overlay, (dir / name).string());
        }
      }
    }
  }
  return report;
}

// ---------- report emission ----------

namespace {

std::string csv_metric(double v, bool present) {
  return present ? fmt_double(v) : std::string();
}

void write_summary_table(std::ostream& out, const StudyRow& row) {
  struct Line {
    const char* name;
    double MetricReport::* field;
    bool distance;
  };
  const Line lines[] = {
      {"Dice Score Coefficient (DSC)", &MetricReport::dice, false},
      {"Jaccard Index (JI)", &MetricReport::jaccard, false},
      {"Precision", &MetricReport::precision, false},
      {"Recall / Sensitivity", &MetricReport::recall, false},
      {"F-1", &MetricReport::f1, false},
      {"Accuracy", &MetricReport::accuracy, false},
      {"Hausdorff Distance (HD)", &MetricReport::hausdorff, true},
      {"Mean Average Distance (MAD)", &MetricReport::mad, true},
      {"Mean Absolute Error (MAE)", &MetricReport::mae, false},
      {"Specificity", &MetricReport::specificity, false},
      {"Boundary Displacement Error (BDE)", &MetricReport::bde, true},
  };
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-36s %10s %14s %10s %10s\n", "Measure", "Basal",
                "Mid-Ventricle", "Apical", "Overall");
  out << buf;
  for (const auto& line : lines) {
    auto cell = [&](const ClassAggregate& a) -> std::string {
      const bool present = line.distance ? a.n_distances > 0 : a.n_slices > 0;
      if (!present) return "-";
      char c[32];
      std::snprintf(c, sizeof c, "%.4f", a.mean.*line.field);
      return c;
    };
    std::snprintf(buf, sizeof buf, "%-36s %10s %14s %10s %10s\n", line.name,
                  cell(row.per_class[0]).c_str(), cell(row.per_class[1]).c_str(),
                  cell(row.per_class[2]).c_str(), cell(row.overall).c_str());
    out << buf;
  }
}

}  // namespace

void emit_report(const StudyReport& report, const PipelineConfig& cfg,
                 const std::string& out_dir) {
  if (report.rows.empty() || report.rows[0].cases.empty())
    throw EmptyStudy("nothing to report");
  fs::create_directories(out_dir);
  save_config(cfg, (fs::path(out_dir) / "config_used.txt").string());

  std::ofstream csv(fs::path(out_dir) / "per_slice.csv");
  if (!csv) throw IoFailure("cannot create per_slice.csv in " + out_dir);
  csv << "set,case_id,p,true_class,predicted_class,class_used,param_set,not_found,"
         "solver_failed,iterations,initial_energy,final_energy,dice,jaccard,precision,"
         "recall,f1,accuracy,specificity,mae,hausdorff,mad,bde\n";
  for (const auto& row : report.rows) {
    for (const auto& cr : row.cases) {
      if (cr.failed) continue;
      for (const auto& o : cr.slices) {
        const bool m = o.metrics.has_value();
        const bool d = m && o.metrics->has_distances;
        csv << row.name << ',' << cr.case_id << ',' << o.p << ','
            << (o.true_class ? to_string(*o.true_class) : "") << ','
            << (o.predicted_class ? to_string(*o.predicted_class) : "") << ','
            << to_string(o.class_used) << ',' << o.set_name << ',' << (o.not_found ? 1 : 0)
            << ',' << (o.solver_failed ? 1 : 0) << ',' << o.iterations_run << ','
            << fmt_double(o.initial_energy) << ',' << fmt_double(o.final_energy) << ','
            << csv_metric(m ? o.metrics->dice : 0, m) << ','
            << csv_metric(m ? o.metrics->jaccard : 0, m) << ','
            << csv_metric(m ? o.metrics->precision : 0, m) << ','
            << csv_metric(m ? o.metrics->recall : 0, m) << ','
            << csv_metric(m ? o.metrics->f1 : 0, m) << ','
            << csv_metric(m ? o.metrics->accuracy : 0, m) << ','
            << csv_metric(m ? o.metrics->specificity : 0, m) << ','
            << csv_metric(m ? o.metrics->mae : 0, m) << ','
            << csv_metric(d ? o.metrics->hausdorff : 0, d) << ','
            << csv_metric(d ? o.metrics->mad : 0, d) << ','
            << csv_metric(d ? o.metrics->bde : 0, d) << '\n';
      }
    }
  }
  if (!csv) throw IoFailure("write failed for per_slice.csv");
  csv.close();

  std::ofstream summary(fs::path(out_dir) / "summary.txt");
  if (!summary) throw IoFailure("cannot create summary.txt in " + out_dir);
  const StudyRow& main_row = report.rows[0];
  int failed_cases = 0;
  for (const auto& cr : main_row.cases) failed_cases += cr.failed ? 1 : 0;
  summary << "Study summary\n=============\n";
  summary << "Cases: " << main_row.cases.size() << " (failed: " << failed_cases << ")\n";
  summary << "Slices: " << main_row.total_slices << ", undetected: " << main_row.not_found;
  if (main_row.total_slices > 0) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " (%.2f%%)",
                  100.0 * main_row.not_found / main_row.total_slices);
    summary << buf;
  }
  summary << ", solver failures: " << main_row.solver_failures << "\n\n";
  if (report.has_gt) {
    summary << "Evaluation (" << main_row.name << "):\n";
    write_summary_table(summary, main_row);
    if (report.rows.size() > 1) {
      summary << "\nParameter-set ablation (Dice):\n";
      char buf[256];
      std::snprintf(buf, sizeof buf, "%-20s %10s %14s %10s %10s\n", "Set of Parameters",
                    "Basal", "Mid-Ventricle", "Apical", "Overall");
      summary << buf;
      for (const auto& row : report.rows) {
        auto cell = [](const ClassAggregate& a) -> std::string {
          if (a.n_slices == 0) return "-";
          char c[32];
          std::snprintf(c, sizeof c, "%.4f", a.mean.dice);
          return c;
        };
        std::snprintf(buf, sizeof buf, "%-20s %10s %14s %10s %10s\n", row.name.c_str(),
                      cell(row.per_class[0]).c_str(), cell(row.per_class[1]).c_str(),
                      cell(row.per_class[2]).c_str(), cell(row.overall).c_str());
        summary << buf;
      }
    }
  }
  for (const auto& cr : main_row.cases)
    if (cr.failed) summary << "\nFAILED case " << cr.case_id << ": " << cr.error << "\n";
  if (!summary) throw IoFailure("write failed for summary.txt");
}

// ---------- grid search ----------

std::array<ParamGrid, kNumClasses> parse_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open grid file " + path);
  std::array<ParamGrid, kNumClasses> grids;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    const auto dot = line.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw UsageError("grid line " + std::to_string(lineno) +
                       " must look like class.param=v1,v2,...");
    const std::string cls_name = line.substr(0, dot);
    const std::string param = line.substr(dot + 1, eq - dot - 1);
    const auto values = parse_doubles(line.substr(eq + 1));
    ParamGrid& g = grids[static_cast<int>(slice_class_from_string(cls_name))];
    if (param == "lambda1")
      g.lambda1 = values;
    else if (param == "lambda2")
      g.lambda2 = values;
    else if (param == "nu")
      g.nu = values;
    else if (param == "shrink")
      g.shrink = values;
    else
      throw UsageError("unknown grid parameter '" + param + "'");
  }
  return grids;
}

GridSearchResult grid_search_params(const std::string& dataset_dir,
                                    const std::array<ParamGrid, kNumClasses>& grids,
                                    const PipelineConfig& cfg) {
  const auto paths = discover_cases(dataset_dir);
  if (paths.empty()) throw EmptyStudy("no cases found under " + dataset_dir);

  struct SliceUnit {
    SliceImage slice;
    Mask gt;
    Mask selection;
    SliceClass cls;
  };
  std::vector<SliceUnit> units;
  for (const auto& path : paths) {
    StudyCase c = load_case(path, cfg, true);
    if (c.gt.empty())
      throw UsageError("grid search needs ground truth for every case (" + c.case_id + ")");
    if (c.true_classes.empty())
      throw UsageError("grid search needs labeled manifests (" + c.case_id + ")");
    const CaseSeeds seeds = compute_case_seeds(c, cfg);
    for (std::size_t i = 0; i < c.slices.size(); ++i) {
      if (!seeds.selections[i]) continue;
      units.push_back({c.slices[i], c.gt[i].pixels, seeds.selections[i]->mask,
                       c.true_classes[i]});
    }
  }

  GridSearchResult result;
  result.registry = cfg.registry;
  result.shrink_targets = {cfg.maskgen.shrink_target_basal, cfg.maskgen.shrink_target_mid,
                           0.0};

  for (int cls = 0; cls < kNumClasses; ++cls) {
    ParamGrid grid = grids[cls];
    const LgdParams& base = cfg.registry.for_class(static_cast<SliceClass>(cls));
    if (grid.lambda1.empty()) grid.lambda1 = {base.lambda1};
    if (grid.lambda2.empty()) grid.lambda2 = {base.lambda2};
    if (grid.nu.empty()) grid.nu = {base.nu};
    if (grid.shrink.empty())
      grid.shrink = {cls == 0 ? cfg.maskgen.shrink_target_basal
                              : cfg.maskgen.shrink_target_mid};
    if (grid.lambda1.empty() || grid.lambda2.empty() || grid.nu.empty() || grid.shrink.empty())
      throw EmptyGrid("empty grid dimension for class " +
                      to_string(static_cast<SliceClass>(cls)));

    std::vector<std::size_t> mine;
    for (std::size_t i = 0; i < units.size(); ++i)
      if (static_cast<int>(units[i].cls) == cls) mine.push_back(i);
    if (mine.empty()) continue;
    result.searched[cls] = true;

    double best_dice = -1, best_nu = 0, best_l1 = 0, best_l2 = 0, best_shrink = 0;
    struct Combo {
      double l1, l2, nu, shrink;
    };
    std::vector<Combo> combos;
    for (double l1 : grid.lambda1)
      for (double l2 : grid.lambda2)
        for (double nu : grid.nu)
          for (double sh : grid.shrink) combos.push_back({l1, l2, nu, sh});

    std::vector<double> combo_dice(combos.size(), 0.0);
    parallel_for(combos.size(), cfg.threads, [&](std::size_t k) {
      const Combo& combo = combos[k];
      ParameterRegistry reg = cfg.registry;
      LgdParams& p = reg.for_class(static_cast<SliceClass>(cls));
      p.lambda1 = combo.l1;
      p.lambda2 = combo.l2;
      p.nu = combo.nu;
      MaskGenConfig mg = cfg.maskgen;
      mg.shrink_target_basal = mg.shrink_target_mid = combo.shrink;
      double total = 0;
      for (std::size_t i : mine) {
        const SliceUnit& u = units[i];
        Mask seed = shrink_mask(u.selection, u.cls, mg);
        try {
          SegmentationResult seg =
              segment_slice(u.slice, seed, u.cls, reg);
          total += dice(seg.mask, u.gt);
        } catch (const NonFiniteField&) {
          // a diverging combo scores the slice as a miss
        }
      }
      combo_dice[k] = total / static_cast<double>(mine.size());
    });

    for (std::size_t k = 0; k < combos.size(); ++k) {
      const Combo& combo = combos[k];
      const double mean = combo_dice[k];
      const bool better =
          mean > best_dice ||
          (mean == best_dice &&
           (combo.nu < best_nu || (combo.nu == best_nu && combo.l1 < best_l1)));
      if (better) {
        best_dice = mean;
        best_l1 = combo.l1;
        best_l2 = combo.l2;
        best_nu = combo.nu;
        best_shrink = combo.shrink;
      }
    }
    LgdParams& chosen = result.registry.for_class(static_cast<SliceClass>(cls));
    chosen.lambda1 = best_l1;
    chosen.lambda2 = best_l2;
    chosen.nu = best_nu;
    result.shrink_targets[cls] = best_shrink;
    result.mean_dice[cls] = best_dice;
  }
  return result;
}

void save_registry(const GridSearchResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot create " + path);
  out << "# tuned parameter registry (config-compatible keys)\n";
  const char* names[3] = {"basal", "mid", "apical"};
  for (int cls = 0; cls < kNumClasses; ++cls) {
    const LgdParams& p = result.registry.for_class(static_cast<SliceClass>(cls));
    const std::string prefix = std::string("params.") + names[cls] + ".";
    out << prefix << "lambda1=" << fmt_double(p.lambda1) << "\n";
    out << prefix << "lambda2=" << fmt_double(p.lambda2) << "\n";
    out << prefix << "nu=" << fmt_double(p.nu) << "\n";
    if (cls < 2) {
      out << "maskgen.shrink_target." << names[cls] << "="
          << fmt_double(result.shrink_targets[cls]) << "\n";
    }
    out << "# class " << names[cls] << (result.searched[cls] ? "" : " (no slices; defaults)")
        << ": mean dice " << fmt_double(result.mean_dice[cls]) << "\n";
  }
  if (!out) throw IoFailure("write failed for " + path);
}

// ---------- classes CSV ----------

void write_classes_csv(const std::string& path,
                       const std::vector<std::tuple<std::string, int, SliceClass>>& rows) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot create " + path);
  out << "case_id,p,class\n";
  for (const auto& [case_id, p, cls] : rows)
    out << case_id << ',' << p << ',' << to_string(cls) << '\n';
  if (!out) throw IoFailure("write failed for " + path);
}

std::map<std::string, std::vector<SliceClass>> read_classes_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw MalformedHeader("empty classes CSV " + path);
  std::map<std::string, std::vector<std::pair<int, SliceClass>>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw MalformedHeader("bad classes CSV row: " + line);
    const std::string case_id = line.substr(0, c1);
    const int p = static_cast<int>(parse_int(line.substr(c1 + 1, c2 - c1 - 1)));
    rows[case_id].push_back({p, slice_class_from_string(line.substr(c2 + 1))});
  }
  std::map<std::string, std::vector<SliceClass>> out;
  for (auto& [case_id, list] : rows) {
    std::sort(list.begin(), list.end());
    std::vector<SliceClass> classes;
    for (auto& [p, cls] : list) classes.push_back(cls);
    out[case_id] = std::move(classes);
  }
  return out;
}

}  // namespace lvseg
