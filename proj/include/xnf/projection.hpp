#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "xnf/alignment.hpp"
#include "xnf/error.hpp"
#include "xnf/spans.hpp"
#include "xnf/tagger.hpp"
#include "xnf/types.hpp"

namespace xnf {

enum class DiscardReason { AlignmentFailure, Overlap, InconsistentMultiMap };

std::string_view to_string(DiscardReason reason);

struct ProjectedEntity {
  EntitySpan target;
  std::string source_surface;
  double score = 1.0;

  bool operator==(const ProjectedEntity&) const = default;
};

struct PseudoLabeledSentence {
  LabeledSentence sentence;
  std::uint64_t pair_id = 0;
  std::string domain;
  std::vector<ProjectedEntity> entities;

  bool is_empty() const { return entities.empty(); }
  bool operator==(const PseudoLabeledSentence&) const = default;
};

using ProjectionOutcome = std::variant<PseudoLabeledSentence, DiscardReason>;

struct ProjectionConfig {
  // Entity types rewritten to O on the teacher output before projection.
  std::vector<std::string> suppress_types;
  double empty_ratio = 0.3;
};

// Projects every source entity through the aligner. Discards when any entity
// is unaligned, when one entity maps to spans with different surfaces, or
// when the collected spans overlap (checked in that order). Identical spans
// produced by repeated source mentions are merged.
ProjectionOutcome project_sentence(const LabeledSentence& source, const std::vector<std::string>& target_tokens,
                                   const Aligner& aligner);

struct ProjectionStats {
  std::size_t processed = 0;
  std::size_t kept = 0;
  std::size_t kept_empty = 0;
  std::map<DiscardReason, std::size_t> discarded;
  // domain -> type -> entity count over kept sentences
  std::map<std::string, std::map<std::string, std::size_t>> entity_counts;

  std::size_t discarded_total() const;
  void add(const ProjectionOutcome& outcome, const std::string& domain);
  void merge(const ProjectionStats& other);

  bool operator==(const ProjectionStats&) const = default;
};

struct PseudoDataset {
  std::vector<PseudoLabeledSentence> sentences;
  ProjectionStats stats;
  // Index of the next pair to process when resuming.
  std::size_t cursor = 0;
};

// Raised when the aligner fails mid-batch. partial holds everything up to
// the failing pair; pass it back to build_pseudo_dataset to resume.
class ProjectionInterrupted : public Error {
 public:
  ProjectionInterrupted(ErrorKind kind, const std::string& what, PseudoDataset partial)
      : Error(kind, what), partial_(std::move(partial)) {}
  const PseudoDataset& partial() const { return partial_; }

 private:
  PseudoDataset partial_;
};

// Teacher tagging, optional type suppression, projection. Pairs with no
// predicted entities are kept as all-O sentences. Work is spread over
// threads up to the aligner's concurrency limit; output is in input order.
PseudoDataset build_pseudo_dataset(const std::vector<ParallelPair>& pairs, const TaggerModel& teacher,
                                   const Aligner& aligner, const ProjectionConfig& cfg, PseudoDataset resume = {});

// Same result computed on a single thread; reference for the parallel path.
PseudoDataset build_pseudo_dataset_serial(const std::vector<ParallelPair>& pairs, const TaggerModel& teacher,
                                          const Aligner& aligner, const ProjectionConfig& cfg,
                                          PseudoDataset resume = {});

// Projection with source tags given directly (no teacher), e.g. gold tags.
PseudoDataset project_labeled(const std::vector<ParallelPair>& pairs, const std::vector<LabeledSentence>& source_tags,
                              const Aligner& aligner, const ProjectionConfig& cfg);

using DomainDatasets = std::map<std::string, std::vector<PseudoLabeledSentence>>;

// Subsamples all-O sentences per domain so that their share is at most
// target_ratio. Non-empty sentences are never dropped; order is preserved.
DomainDatasets balance_empty_ratio(const DomainDatasets& datasets, double target_ratio, std::uint64_t seed);

// Number of empties that may stay next to non_empty sentences.
std::size_t allowed_empties(std::size_t non_empty, double target_ratio);

DomainDatasets split_by_domain(const std::vector<PseudoLabeledSentence>& sentences);
std::vector<LabeledSentence> sentences_of(const std::vector<PseudoLabeledSentence>& data);

}  // namespace xnf
