#pragma once

// Hand-built projection cases shared by the unit tests and the acceptance
// binary.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xnf/alignment.hpp"
#include "xnf/projection.hpp"

namespace fixtures {

// Answers each entity surface with a fixed list of spans; unknown surfaces
// get an empty result.
class ScriptedAligner final : public xnf::Aligner {
 public:
  explicit ScriptedAligner(std::map<std::string, std::vector<xnf::AlignedSpan>> script) : script_(std::move(script)) {}

  xnf::AlignmentResult align(const xnf::AlignmentQuery& q) const override {
    auto it = script_.find(q.entity_surface);
    if (it == script_.end()) return {};
    return {it->second};
  }
  std::size_t max_concurrency() const override { return 1; }

 private:
  std::map<std::string, std::vector<xnf::AlignedSpan>> script_;
};

struct ProjectionFixture {
  std::string name;
  xnf::LabeledSentence source;
  std::vector<std::string> target;
  std::map<std::string, std::vector<xnf::AlignedSpan>> script;
  // Expected tags when kept, otherwise the discard reason.
  std::optional<std::vector<std::string>> tags;
  std::optional<xnf::DiscardReason> reason;
};

inline std::vector<ProjectionFixture> projection_fixtures() {
  using R = xnf::DiscardReason;
  std::vector<ProjectionFixture> f;
  f.push_back({"single entity kept",
               {{"Anna", "lives", "here"}, {"B-PER", "O", "O"}},
               {"Anna", "wohnt", "hier"},
               {{"Anna", {{0, 1}}}},
               std::vector<std::string>{"B-PER", "O", "O"},
               {}});
  f.push_back({"no entities kept empty",
               {{"it", "rains"}, {"O", "O"}},
               {"es", "regnet"},
               {},
               std::vector<std::string>{"O", "O"},
               {}});
  f.push_back({"two entities reordered in target",
               {{"Anna", "met", "Acme", "Corp"}, {"B-PER", "O", "B-ORG", "I-ORG"}},
               {"Acme", "Corp", "traf", "Anna"},
               {{"Anna", {{3, 4}}}, {"Acme Corp", {{0, 2}}}},
               std::vector<std::string>{"B-ORG", "I-ORG", "O", "B-PER"},
               {}});
  f.push_back({"adjacent target spans kept",
               {{"Anna", "from", "Rome"}, {"B-PER", "O", "B-LOC"}},
               {"Anna", "Rom", "kam"},
               {{"Anna", {{0, 1}}}, {"Rome", {{1, 2}}}},
               std::vector<std::string>{"B-PER", "B-LOC", "O"},
               {}});
  f.push_back({"repeated mention, identical surfaces kept",
               {{"Paris", "is", "Paris"}, {"B-LOC", "O", "B-LOC"}},
               {"Paris", "bleibt", "Paris"},
               {{"Paris", {{0, 1}, {2, 3}}}},
               std::vector<std::string>{"B-LOC", "O", "B-LOC"},
               {}});
  f.push_back({"one mention, two case-folded identical target spans kept",
               {{"Cologne", "fans"}, {"B-LOC", "O"}},
               {"Köln", "liebt", "KÖLN"},
               {{"Cologne", {{0, 1}, {2, 3}}}},
               std::vector<std::string>{"B-LOC", "O", "B-LOC"},
               {}});
  f.push_back({"single entity unaligned",
               {{"Zanzibar", "is", "far"}, {"B-LOC", "O", "O"}},
               {"das", "ist", "weit"},
               {},
               {},
               R::AlignmentFailure});
  f.push_back({"second of two entities unaligned",
               {{"Anna", "visits", "Zanzibar"}, {"B-PER", "O", "B-LOC"}},
               {"Anna", "besucht", "Sansibar"},
               {{"Anna", {{0, 1}}}},
               {},
               R::AlignmentFailure});
  f.push_back({"different surfaces for one entity",
               {{"Cologne", "fans"}, {"B-LOC", "O"}},
               {"Köln", "und", "Koeln"},
               {{"Cologne", {{0, 1}, {2, 3}}}},
               {},
               R::InconsistentMultiMap});
  f.push_back({"different-length surfaces for one entity",
               {{"New", "York", "fans"}, {"B-LOC", "I-LOC", "O"}},
               {"New", "York", "oder", "York"},
               {{"New York", {{0, 2}, {3, 4}}}},
               {},
               R::InconsistentMultiMap});
  f.push_back({"two entities on overlapping spans",
               {{"Acme", "hired", "Anna"}, {"B-ORG", "O", "B-PER"}},
               {"Anna", "Acme", "GmbH"},
               {{"Acme", {{1, 3}}}, {"Anna", {{0, 2}}}},
               {},
               R::Overlap});
  f.push_back({"two types on the same span",
               {{"Jordan", "visited", "Jordan"}, {"B-PER", "O", "B-LOC"}},
               {"Jordan", "reiste"},
               {{"Jordan", {{0, 1}}}},
               {},
               R::Overlap});
  f.push_back({"unaligned entity reported before inconsistent one",
               {{"Cologne", "and", "Zanzibar"}, {"B-LOC", "O", "B-LOC"}},
               {"Köln", "und", "Koeln"},
               {{"Cologne", {{0, 1}, {2, 3}}}},
               {},
               R::AlignmentFailure});
  f.push_back({"inconsistent entity reported before overlap",
               {{"Cologne", "and", "Acme"}, {"B-LOC", "O", "B-ORG"}},
               {"Köln", "Koeln", "AG"},
               {{"Cologne", {{0, 1}, {1, 2}}}, {"Acme", {{0, 3}}}},
               {},
               R::InconsistentMultiMap});
  return f;
}

struct FixtureResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

inline FixtureResult run_fixture(const ProjectionFixture& fx) {
  ScriptedAligner aligner(fx.script);
  const auto out = xnf::project_sentence(fx.source, fx.target, aligner);
  FixtureResult r{fx.name, false, {}};
  if (const auto* reason = std::get_if<xnf::DiscardReason>(&out)) {
    r.ok = fx.reason && *fx.reason == *reason;
    r.detail = "discarded " + std::string(xnf::to_string(*reason));
  } else {
    const auto& kept = std::get<xnf::PseudoLabeledSentence>(out);
    r.ok = fx.tags && *fx.tags == kept.sentence.tags && kept.sentence.tokens == fx.target;
    r.detail = "kept";
  }
  return r;
}

}  // namespace fixtures
