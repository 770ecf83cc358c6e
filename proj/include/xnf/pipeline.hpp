#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "xnf/alignment.hpp"
#include "xnf/corpus_io.hpp"
#include "xnf/evalkit.hpp"
#include "xnf/losses.hpp"
#include "xnf/projection.hpp"
#include "xnf/tagger.hpp"

namespace xnf {

struct ParallelPaths {
  std::string source;
  std::string target;
};

// Empty paths resolve to the files `synth` writes under <out>/synth.
struct PipelinePaths {
  std::string source_train;
  std::string source_test;
  std::map<std::string, ParallelPaths> parallel;  // by domain
  std::map<std::string, std::string> target_test;  // test set name -> CoNLL
  std::string lexicon;
  std::string out_dir = "xnf-run";
};

struct SynthDomain {
  std::string name;
  std::size_t pairs = 0;
  // Empty keeps the generator's weights.
  std::vector<std::pair<std::string, double>> type_weights;
};

struct SynthSettings {
  SynthSpec spec;
  std::size_t source_train = 1000;
  std::size_t source_test = 300;
  std::size_t target_test = 500;
  std::vector<SynthDomain> domains = {{"synthetic", 4000, {}}};
};

struct PipelineConfig {
  PipelinePaths paths;
  TaggerConfig arch;
  TrainConfig teacher = default_teacher();
  TrainConfig student = default_student();

  std::string aligner = "lexical";  // "lexical" or "remote"
  AlignerConfig aligner_config;
  std::string endpoint;
  double timeout_seconds = 30.0;
  std::size_t max_in_flight = 4;

  bool suppress_misc = false;
  double empty_ratio = 0.3;
  // Equal-weight sample over domains before projection; unset uses every pair.
  std::optional<std::size_t> sample_n;
  // Run seed; arch, teacher and student seeds are derived from it.
  std::uint64_t seed = 1;

  SynthSettings synth;

  static TrainConfig default_teacher();
  static TrainConfig default_student();

  // Checks value invariants (not paths).
  void validate() const;
  // Sets every derived seed from `seed`.
  void apply_seed();
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

// Defaults, then the JSON file at path (if any).
PipelineConfig load_pipeline_config(const std::optional<std::string>& path);

// Paths with empty entries replaced by the synth outputs under out_dir.
PipelinePaths resolve_paths(const PipelineConfig& cfg);

// Raises Config naming the field when a path does not exist.
void require_path(const std::string& field, const std::string& path);

// ------------------------------------------------------------ stages

struct StageArtifact {
  int stage = 0;
  std::string content_hash;
  std::string timestamp;  // UTC, ISO 8601
  std::map<std::string, std::string> input_hashes;
};

void to_json(nlohmann::json& j, const StageArtifact& a);
void from_json(const nlohmann::json& j, StageArtifact& a);

std::optional<StageArtifact> read_stage(const std::string& path);
void write_stage(const std::string& path, const StageArtifact& a);

// Exclusive ownership of a run directory for the lifetime of the object.
class RunLock {
 public:
  explicit RunLock(const std::string& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::string path_;
};

struct StageResult {
  bool skipped = false;
  std::vector<std::string> outputs;
};

struct RunOptions {
  bool force = false;  // ignore cached stages
};

// Output locations inside out_dir.
struct RunLayout {
  std::string root;
  std::string synth_dir() const { return root + "/synth"; }
  std::string teacher_model() const { return root + "/teacher/model.xnft"; }
  std::string teacher_stage() const { return root + "/teacher/stage.json"; }
  std::string pseudo_dir() const { return root + "/pseudo"; }
  std::string pseudo_stage() const { return root + "/pseudo/stage.json"; }
  std::string cursor_file() const { return root + "/pseudo/cursor.json"; }
  std::string student_model() const { return root + "/student/model.xnft"; }
  std::string student_stage() const { return root + "/student/stage.json"; }
  std::string eval_dir() const { return root + "/eval"; }
  std::string experiment_dir(const std::string& kind) const { return root + "/experiments/" + kind; }
};

StageResult cmd_synth(const PipelineConfig& cfg, const RunOptions& opts = {});
StageResult cmd_train_teacher(const PipelineConfig& cfg, const RunOptions& opts = {});
StageResult cmd_project(const PipelineConfig& cfg, const RunOptions& opts = {});
StageResult cmd_finetune(const PipelineConfig& cfg, const RunOptions& opts = {});

struct EvaluateRequest {
  // "student", "teacher" or a model path.
  std::string model = "student";
  // Name -> CoNLL path; empty means the configured target test sets.
  std::map<std::string, std::string> testsets;
};

struct EvaluateOutcome {
  std::map<std::string, EvalReport> reports;
  std::vector<std::string> outputs;
};

EvaluateOutcome cmd_evaluate(const PipelineConfig& cfg, const EvaluateRequest& req);

// Experiment description as read from JSON:
//   {"kind": "ablation"|"domain-mix"|"size-sweep", "seeds": [...],
//    "parallel": bool, plus the fields of the matching harness spec}.
ExperimentSpec parse_experiment_spec(const nlohmann::json& j, const std::string& run_dir);
std::string experiment_kind(const ExperimentSpec& spec);

struct ExperimentOutcome {
  std::vector<ReportTable> tables;
  std::vector<std::string> outputs;
};

ExperimentOutcome cmd_experiment(const PipelineConfig& cfg, const nlohmann::json& spec);

// Assembles teacher, pseudo data and test sets from a finished pipeline run.
TransferSetup load_transfer_setup(const PipelineConfig& cfg);

// Stats file contents for a projection run.
nlohmann::json stats_json(const ProjectionStats& stats, const DomainDatasets& balanced);
ReportTable counts_table(const ProjectionStats& stats, const TypeSet& types);

}  // namespace xnf
