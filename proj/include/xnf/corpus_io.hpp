#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xnf/lexicon.hpp"
#include "xnf/types.hpp"

namespace xnf {

// CoNLL: one token per line, whitespace-separated columns, last column is the
// tag; blank lines separate sentences; "-DOCSTART-" lines are skipped. IOB1
// input is normalized to IOB2.
std::vector<LabeledSentence> parse_conll(std::string_view text, const TypeSet& types);
std::string write_conll(const std::vector<LabeledSentence>& sentences);

// Moses-style line-aligned pair of files. Pair ids are 0-based line numbers.
std::vector<ParallelPair> read_parallel(std::string_view source_text, std::string_view target_text,
                                        const std::string& domain);

struct DomainCorpus {
  std::string domain;
  std::vector<ParallelPair> pairs;
};

// Per-domain quotas for sample_equal_weights: n split evenly, with the deficit
// of domains too small for their share spread over the rest.
std::vector<std::size_t> equal_weight_quotas(const std::vector<std::size_t>& sizes, std::size_t n);

std::vector<ParallelPair> sample_equal_weights(const std::vector<DomainCorpus>& corpora, std::size_t n,
                                               std::uint64_t seed);

struct SynthSpec {
  std::size_t vocab_size = 600;
  std::uint64_t lexicon_seed = 7;
  double entity_rate = 0.5;
  double reorder_prob = 0.2;
  std::vector<std::pair<std::string, double>> type_weights = {
      {"PER", 1.0}, {"ORG", 1.0}, {"LOC", 1.0}, {"MISC", 1.0}};
  std::string domain = "synthetic";
  // Share of entity words that keep their source spelling on the target side.
  double name_copy_rate = 0.3;
  // Chance that an inserted entity is mentioned a second time.
  double repeat_rate = 0.05;

  void validate() const;
};

struct SyntheticCorpus {
  std::vector<LabeledSentence> source_gold;
  std::vector<ParallelPair> pairs;
  std::vector<LabeledSentence> target_gold;
  Lexicon lexicon;
};

SyntheticCorpus gen_synthetic_corpus(const SynthSpec& spec, std::size_t n_sentences, std::uint64_t seed);

}  // namespace xnf
