#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xnf/corpus_io.hpp"
#include "xnf/lexicon.hpp"
#include "xnf/spans.hpp"
#include "xnf/types.hpp"

namespace xnf {

// A source-language entity name (segment A) and the target sentence to search
// (segment B).
struct AlignmentQuery {
  std::string entity_surface;
  std::vector<std::string> target_tokens;

  void validate() const;
};

struct AlignedSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  double score = 1.0;

  bool operator==(const AlignedSpan&) const = default;
};

// Contiguous target spans sorted by start; empty means the entity was not
// found.
struct AlignmentResult {
  std::vector<AlignedSpan> spans;

  bool empty() const { return spans.empty(); }
  bool operator==(const AlignmentResult&) const = default;
};

struct AlignerConfig {
  double threshold = 0.7;
  std::size_t max_span_len = 6;
  double tie_epsilon = 0.02;

  void validate() const;
};

class Aligner {
 public:
  virtual ~Aligner() = default;
  virtual AlignmentResult align(const AlignmentQuery& query) const = 0;
  // Upper bound on concurrent align() calls callers should issue.
  virtual std::size_t max_concurrency() const = 0;
};

// Scores every target span up to max_span_len tokens: 1.0 if the span is a
// lexicon translation of the entity, otherwise normalized edit similarity.
// Returns the non-overlapping spans within tie_epsilon of the best score,
// provided the best clears the threshold.
AlignmentResult align_lexical(const AlignmentQuery& query, const Lexicon& lexicon, const AlignerConfig& cfg);

class LexicalAligner final : public Aligner {
 public:
  LexicalAligner(Lexicon lexicon, AlignerConfig cfg) : lexicon_(std::move(lexicon)), cfg_(cfg) { cfg_.validate(); }

  AlignmentResult align(const AlignmentQuery& query) const override { return align_lexical(query, lexicon_, cfg_); }
  std::size_t max_concurrency() const override { return SIZE_MAX; }

 private:
  Lexicon lexicon_;
  AlignerConfig cfg_;
};

// Each maximal run of 1s becomes one span; adjacent runs are never merged.
// Span score is the mean of the run's token scores, or 1.0 without scores.
std::vector<AlignedSpan> mask_to_spans(const std::vector<int>& mask, const std::vector<double>* scores = nullptr);
std::vector<int> spans_to_mask(const std::vector<AlignedSpan>& spans, std::size_t length);

// Wire format of the remote aligner.
//   request:  {"entity": str, "tokens": [str, ...]}
//   response: {"mask": [0|1, ...], "scores": [real, ...]}  (scores optional)
std::string encode_align_request(const AlignmentQuery& query);
AlignmentResult decode_align_response(std::string_view body, std::size_t n_tokens);

AlignmentResult align_remote(const AlignmentQuery& query, const std::string& endpoint,
                             std::chrono::milliseconds timeout);

class RemoteAligner final : public Aligner {
 public:
  RemoteAligner(std::string endpoint, std::chrono::milliseconds timeout, std::size_t max_in_flight);

  AlignmentResult align(const AlignmentQuery& query) const override;
  std::size_t max_concurrency() const override { return max_in_flight_; }

  // Issues up to max_in_flight requests at a time; result i answers query i.
  // On failure the error of the lowest failing index is rethrown.
  std::vector<AlignmentResult> align_batch(const std::vector<AlignmentQuery>& queries) const;

 private:
  std::string endpoint_;
  std::chrono::milliseconds timeout_;
  std::size_t max_in_flight_;
};

// ------------------------------------------------ aligner training data

struct AlignmentExample {
  std::string entity;
  std::vector<std::string> tokens;
  std::vector<int> mask;

  bool is_negative() const;
  bool operator==(const AlignmentExample&) const = default;
};

// A parallel pair whose k-th source span and k-th target span name the same
// entity.
struct GoldPair {
  ParallelPair pair;
  std::vector<EntitySpan> source_spans;
  std::vector<EntitySpan> target_spans;
};

std::vector<GoldPair> gold_pairs(const SyntheticCorpus& corpus);

struct AlignmentDataOptions {
  // Share of examples built from aligned non-entity words instead of named
  // entities. Needs a lexicon.
  double noun_phrase_frac = 0.0;
  const Lexicon* lexicon = nullptr;
};

// n examples; round(n * negative_frac) of them are negatives pairing a target
// sentence with an entity name that shares no word with its source side (all-zero mask).
std::vector<AlignmentExample> gen_alignment_training_data(const std::vector<GoldPair>& pairs, std::size_t n,
                                                          double negative_frac, std::uint64_t seed,
                                                          const AlignmentDataOptions& options = {});

// {"entity": str, "tokens": [str], "mask": [int]} per line.
std::string to_jsonl(const std::vector<AlignmentExample>& examples);
std::vector<AlignmentExample> from_jsonl(std::string_view text);

}  // namespace xnf
