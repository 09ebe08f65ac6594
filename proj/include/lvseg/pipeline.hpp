#ifndef LVSEG_PIPELINE_HPP
#define LVSEG_PIPELINE_HPP

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lvseg/classifier.hpp"
#include "lvseg/features.hpp"
#include "lvseg/lgdacm.hpp"
#include "lvseg/maskgen.hpp"
#include "lvseg/metrics.hpp"
#include "lvseg/volume_io.hpp"

namespace lvseg {

/// Every knob of a run. Serializes to a flat key=value file; a run is
/// reproducible from that file alone.
struct PipelineConfig {
  std::uint64_t seed = 1;
  int lv_label = 3;
  int working_rows = 200;
  int working_cols = 200;
  int threads = 1;
  bool use_true_classes = false;  // oracle-class mode isolating phase-2 quality
  DaisyConfig daisy;
  ForestHyper forest;
  MaskGenConfig maskgen;
  ParameterRegistry registry = ParameterRegistry::defaults();
};

PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::string& path);
std::string serialize_config(const PipelineConfig& cfg);
void save_config(const PipelineConfig& cfg, const std::string& path);

/// One loaded case at working resolution.
struct StudyCase {
  std::string case_id;
  std::string path;
  std::vector<SliceImage> slices;
  std::vector<GroundTruthMask> gt;           // empty when unavailable
  std::vector<SliceClass> true_classes;      // empty when unavailable
};

/// Case paths under a dataset directory: slice-directories (manifest.txt) and
/// NIfTI files, sorted by name. Ground-truth NIfTI companions (*_gt.nii[.gz])
/// are paired, not listed.
std::vector<std::string> discover_cases(const std::string& dataset_dir);
StudyCase load_case(const std::string& path, const PipelineConfig& cfg, bool want_gt);

std::vector<SliceClass> run_phase1(const CmrVolume& volume, const RandomForestModel& model,
                                   const PipelineConfig& cfg);

struct SliceOutcome {
  int p = 1;
  SliceClass class_used = SliceClass::Basal;
  std::optional<SliceClass> true_class;
  std::optional<SliceClass> predicted_class;
  bool not_found = false;
  bool solver_failed = false;
  std::string set_name;  // A, B or C
  int iterations_run = 0;
  double initial_energy = 0;
  double final_energy = 0;
  std::optional<MetricReport> metrics;
  Mask mask;
};

struct CaseResult {
  std::string case_id;
  std::vector<SliceOutcome> slices;
  bool failed = false;
  std::string error;
};

/// Per-slice seed masks: the joint first-three-slice selection followed by
/// sequential selection threaded through the previous centroid.
struct CaseSeeds {
  std::vector<std::optional<MaskSelection>> selections;
  bool triple_consistent = false;
};
CaseSeeds compute_case_seeds(const StudyCase& c, const PipelineConfig& cfg);

/// Phase 2 with an explicit registry (ablation rows reuse the same seeds).
CaseResult run_phase2_with_seeds(const StudyCase& c, const std::vector<SliceClass>& classes,
                                 const CaseSeeds& seeds, const ParameterRegistry& registry,
                                 const PipelineConfig& cfg);

CaseResult run_phase2(const StudyCase& c, const std::vector<SliceClass>& classes,
                      const PipelineConfig& cfg);

struct ClassAggregate {
  int n_slices = 0;     // slices with overlap metrics
  int n_distances = 0;  // slices with boundary distances
  MetricReport mean;    // means over the counts above
};

struct StudyRow {
  std::string name;  // Proposed, Parameter Set A/B/C
  std::array<ClassAggregate, kNumClasses> per_class;
  ClassAggregate overall;
  int total_slices = 0;
  int not_found = 0;
  int solver_failures = 0;
  std::vector<CaseResult> cases;
};

struct StudyReport {
  std::vector<StudyRow> rows;  // rows[0] is the per-class registry
  bool has_gt = false;
};

struct StudyOptions {
  bool with_gt = false;
  bool ablation = false;
  bool dump_masks = false;
  std::string classes_csv;  // empty => manifest classes (oracle mode)
  std::string out_dir;      // set => emit files (masks respect dump_masks)
};

StudyReport run_study(const std::string& dataset_dir, const PipelineConfig& cfg,
                      const StudyOptions& opt);

void emit_report(const StudyReport& report, const PipelineConfig& cfg,
                 const std::string& out_dir);

/// Per-class Cartesian grid over (lambda1, lambda2, nu, shrink target).
struct ParamGrid {
  std::vector<double> lambda1, lambda2, nu, shrink;
};
std::array<ParamGrid, kNumClasses> parse_grid_file(const std::string& path);

struct GridSearchResult {
  ParameterRegistry registry;
  std::array<double, kNumClasses> shrink_targets{};
  std::array<double, kNumClasses> mean_dice{};
  std::array<bool, kNumClasses> searched{};  // false when a class had no slices
};
GridSearchResult grid_search_params(const std::string& dataset_dir,
                                    const std::array<ParamGrid, kNumClasses>& grids,
                                    const PipelineConfig& cfg);
void save_registry(const GridSearchResult& result, const std::string& path);

// classes CSV: header case_id,p,class
void write_classes_csv(const std::string& path,
                       const std::vector<std::tuple<std::string, int, SliceClass>>& rows);
std::map<std::string, std::vector<SliceClass>> read_classes_csv(const std::string& path);

}  // namespace lvseg

#endif
