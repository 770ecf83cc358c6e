#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "xnf/losses.hpp"
#include "xnf/tagger.hpp"
#include "xnf/types.hpp"

namespace xnf {

// ------------------------------------------------------------ scoring

struct Metrics {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  // Fills precision/recall/f1 from the counts. Precision is 0 when nothing
  // was predicted.
  void finalize();
  bool operator==(const Metrics&) const = default;
};

struct EvalReport {
  std::map<std::string, Metrics> per_type;
  Metrics micro;

  bool operator==(const EvalReport&) const = default;
};

// Exact (start, end, type) span matching per sentence, micro-pooled over types.
EvalReport evaluate(const std::vector<LabeledSentence>& pred, const std::vector<LabeledSentence>& gold);

// ------------------------------------------------------------ transfer steps

// Teacher parameters carried over to a vocabulary built from the target data,
// then trained on it.
TaggerModel finetune_student(const TaggerModel& teacher, const std::vector<LabeledSentence>& data,
                             const TrainConfig& cfg);

// Fresh model over the data's own vocabulary, trained from random init.
TaggerModel train_from_scratch(const TaggerConfig& arch, const std::vector<LabeledSentence>& data,
                               const TrainConfig& cfg);

EvalReport evaluate_model(const TaggerModel& model, const std::vector<LabeledSentence>& gold);

// Replaces each tag, with probability rate, by a different label drawn
// uniformly from labels.
std::vector<LabeledSentence> inject_label_noise(const std::vector<LabeledSentence>& data,
                                                const std::vector<std::string>& labels, double rate,
                                                std::uint64_t seed);

// ------------------------------------------------------------ harnesses

// Everything the harnesses train and evaluate on.
struct TransferSetup {
  TypeSet types = TypeSet::conll();
  TaggerConfig arch;
  TrainConfig teacher_train;
  TrainConfig student_train;
  std::vector<LabeledSentence> source_train;
  TaggerModel teacher{TaggerConfig{}, Vocab{}};
  std::map<std::string, std::vector<LabeledSentence>> pseudo;    // by domain
  std::map<std::string, std::vector<LabeledSentence>> testsets;  // target gold
};

struct DomainMixSpec {
  std::vector<std::string> domains;
  std::vector<std::string> testsets;
  // Test set for the per-type breakdown; defaults to the first test set.
  std::string breakdown_testset;
};

struct SizeSweepSpec {
  std::vector<std::size_t> sizes;  // strictly increasing
  std::string testset;
  // Domains pooled for the sweep; empty means all.
  std::vector<std::string> domains;
};

struct AblationSpec {
  std::string testset;
  double label_noise = 0.0;
  // Source sentences per pseudo sentence in the mixed settings.
  double mixed_ratio = 1.0;
};

struct ExperimentSpec {
  std::variant<DomainMixSpec, SizeSweepSpec, AblationSpec> variant;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  // Per-cell manifests and metrics are written here when set.
  std::optional<std::string> run_dir;
  bool parallel = true;

  void validate() const;
};

struct DomainMixResult {
  std::vector<std::string> rows;     // "zero-transfer", domains..., "combined"
  std::vector<std::string> columns;  // test sets
  std::vector<std::vector<double>> f1;  // mean over seeds
  std::vector<std::string> types;
  std::vector<std::vector<double>> type_f1;  // rows x types on the breakdown set
  std::string breakdown_testset;
  std::vector<std::string> count_rows;  // domains..., "combined"
  std::vector<std::vector<std::size_t>> counts;  // count_rows x (types..., All)
};

struct SizePoint {
  std::size_t size = 0;
  double mean_f1 = 0.0;
  double stddev = 0.0;
  std::vector<double> per_seed;
};

struct SizeSweepResult {
  std::vector<SizePoint> points;
  // First size whose mean F1 is within 1 point (0.01) of the best mean.
  std::size_t plateau_size = 0;
};

// Everything that defines one ablation setting's training run.
struct SettingManifest {
  int setting = 0;
  std::string name;
  std::string init;  // "teacher", "scratch" or "none"
  std::string data;  // "pseudo", "source+pseudo" or "none"
  std::string loss;  // "ce", "focal", "rw" or "none"
  double gamma = 0.0;
  std::size_t epochs = 0;
  double learning_rate = 0.0;
  std::size_t batch_size = 0;
  bool freeze_embeddings = false;

  bool operator==(const SettingManifest&) const = default;
};

struct AblationRow {
  SettingManifest manifest;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<double> per_seed_f1;
};

struct AblationResult {
  std::vector<AblationRow> rows;  // settings 1..6 in order
};

// The six settings: (1) sequential fine-tune with the student loss,
// (2) zero-transfer, (3) sequential with CE, (4) pseudo data only from
// scratch, (5) mixed source+pseudo with CE, (6) mixed with the student loss.
std::vector<SettingManifest> ablation_settings(const TransferSetup& setup);

DomainMixResult run_domain_mix(const TransferSetup& setup, const ExperimentSpec& spec);
SizeSweepResult run_size_sweep(const TransferSetup& setup, const ExperimentSpec& spec);
AblationResult run_ablation(const TransferSetup& setup, const ExperimentSpec& spec);

// ------------------------------------------------------------ reports

struct ReportTable {
  enum class Kind { Metric, Count };

  std::string title;
  std::string row_header = "row";
  std::vector<std::string> columns;
  std::vector<Kind> kinds;  // per column
  std::vector<std::string> row_labels;
  std::vector<std::vector<double>> values;
  std::vector<std::string> notes;  // markdown only
};

enum class ReportFormat { Csv, Markdown };

std::vector<ReportTable> report_tables(const DomainMixResult& r);
std::vector<ReportTable> report_tables(const SizeSweepResult& r);
std::vector<ReportTable> report_tables(const AblationResult& r);
ReportTable report_table(const EvalReport& r);

// Metrics print as fractions with 4 decimals in CSV and as percentages with 1
// decimal in markdown; counts print as integers.
std::string emit_report(const ReportTable& table, ReportFormat format);
std::string emit_report(const std::vector<ReportTable>& tables, ReportFormat format);

// Reads back a single table emitted as CSV (values as written).
ReportTable parse_report_csv(std::string_view text);

}  // namespace xnf
