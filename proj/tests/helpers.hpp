#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "xnf/corpus_io.hpp"
#include "xnf/rng.hpp"
#include "xnf/spans.hpp"
#include "xnf/tagger.hpp"
#include "xnf/types.hpp"

namespace testutil {

inline const std::vector<std::string>& conll_types() {
  static const std::vector<std::string> t = {"PER", "ORG", "LOC", "MISC"};
  return t;
}

// Arbitrary (possibly IOB2-invalid) tag sequence.
inline std::vector<std::string> random_tags(xnf::Rng& rng, std::size_t n) {
  std::vector<std::string> tags;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = rng.below(5);
    if (r < 2) {
      tags.push_back("O");
    } else {
      const auto& t = conll_types()[rng.below(4)];
      tags.push_back((r == 2 ? "B-" : "I-") + t);
    }
  }
  return tags;
}

// Non-overlapping spans placed left to right.
inline std::vector<xnf::EntitySpan> random_spans(xnf::Rng& rng, std::size_t n) {
  std::vector<xnf::EntitySpan> spans;
  std::size_t i = 0;
  while (i < n) {
    if (rng.bernoulli(0.3)) {
      const std::size_t len = 1 + rng.below(std::min<std::size_t>(3, n - i));
      spans.push_back({i, i + len, conll_types()[rng.below(4)], ""});
      i += len;
    } else {
      ++i;
    }
  }
  return spans;
}

inline std::string random_word(xnf::Rng& rng) {
  static const std::vector<std::string> pieces = {"ka", "lo", "mi", "Ber", "z", "ö", "ñe", "ßu", "Q", "x"};
  std::string w;
  const auto k = 1 + rng.below(3);
  for (std::size_t i = 0; i < k; ++i) w += pieces[rng.below(pieces.size())];
  return w;
}

inline xnf::LabeledSentence random_sentence(xnf::Rng& rng, std::size_t max_len = 12) {
  const std::size_t n = 1 + rng.below(max_len);
  xnf::LabeledSentence s;
  for (std::size_t i = 0; i < n; ++i) s.tokens.push_back(random_word(rng));
  s.tags = xnf::encode_spans(random_spans(rng, n), n);
  return s;
}

inline std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("xnf_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

// Synthetic world shared by the slower tests; built once per process.
struct World {
  xnf::SyntheticCorpus train;
  xnf::SyntheticCorpus parallel;
  xnf::SyntheticCorpus test;
  xnf::TaggerModel teacher{xnf::TaggerConfig{}, xnf::Vocab{}};
};

inline xnf::TrainConfig teacher_config() {
  xnf::TrainConfig c;
  c.loss = xnf::LossKind::focal(2.0);
  c.epochs = 5;
  c.learning_rate = 1.0;
  return c;
}

inline const World& world() {
  static const World w = [] {
    World out;
    xnf::SynthSpec spec;
    out.train = xnf::gen_synthetic_corpus(spec, 1000, 11);
    out.parallel = xnf::gen_synthetic_corpus(spec, 1000, 12);
    out.test = xnf::gen_synthetic_corpus(spec, 300, 13);
    auto init = xnf::TaggerModel::initialized(xnf::TaggerConfig{}, xnf::build_vocab(out.train.source_gold, 1));
    out.teacher = xnf::train(init, out.train.source_gold, teacher_config()).model;
    return out;
  }();
  return w;
}

}  // namespace testutil
