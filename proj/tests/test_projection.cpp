#include <doctest.h>

#include <atomic>
#include <set>

#include "fixtures.hpp"
#include "helpers.hpp"
#include "oracles.hpp"
#include "xnf/projection.hpp"

using namespace xnf;

namespace {

PseudoLabeledSentence make(const std::string& domain, bool empty, std::uint64_t id) {
  PseudoLabeledSentence s;
  s.domain = domain;
  s.pair_id = id;
  s.sentence = {{"w"}, {empty ? "O" : "B-PER"}};
  if (!empty) s.entities.push_back({{0, 1, "PER", "w"}, "w", 1.0});
  return s;
}

std::vector<PseudoLabeledSentence> mixed(const std::string& domain, std::size_t empties, std::size_t non_empty) {
  std::vector<PseudoLabeledSentence> out;
  for (std::size_t i = 0; i < empties + non_empty; ++i) out.push_back(make(domain, i < empties, i));
  return out;
}

std::size_t count_empty(const std::vector<PseudoLabeledSentence>& d) {
  std::size_t n = 0;
  for (const auto& s : d) n += s.is_empty() ? 1 : 0;
  return n;
}

// Fails once with a Transport error on the given target sentence.
class FlakyAligner final : public Aligner {
 public:
  FlakyAligner(const Aligner& inner, std::vector<std::string> poison) : inner_(inner), poison_(std::move(poison)) {}
  AlignmentResult align(const AlignmentQuery& q) const override {
    if (armed_ && q.target_tokens == poison_) throw Error(ErrorKind::Transport, "connection reset");
    return inner_.align(q);
  }
  std::size_t max_concurrency() const override { return 4; }
  void disarm() { armed_ = false; }

 private:
  const Aligner& inner_;
  std::vector<std::string> poison_;
  std::atomic<bool> armed_{true};
};

}  // namespace

TEST_CASE("projection fixtures") {
  const auto all = fixtures::projection_fixtures();
  CHECK(all.size() >= 12);
  std::set<std::string> outcomes;
  for (const auto& fx : all) {
    const auto r = fixtures::run_fixture(fx);
    INFO(fx.name << ": " << r.detail);
    CHECK(r.ok);
    outcomes.insert(fx.reason ? std::string(to_string(*fx.reason)) : "keep");
  }
  CHECK(outcomes.size() == 4);
}

TEST_CASE("kept sentences carry provenance and valid tags") {
  fixtures::ScriptedAligner aligner({{"Acme Corp", {{0, 2, 0.8}}}, {"Anna", {{3, 4, 0.9}}}});
  const auto out = project_sentence({{"Anna", "met", "Acme", "Corp"}, {"B-PER", "O", "B-ORG", "I-ORG"}},
                                    {"Acme", "Corp", "traf", "Anna"}, aligner);
  const auto& kept = std::get<PseudoLabeledSentence>(out);
  REQUIRE(kept.entities.size() == 2);
  CHECK(kept.entities[0].source_surface == "Acme Corp");
  CHECK(kept.entities[0].score == 0.8);
  CHECK(kept.entities[0].target.surface == "Acme Corp");
  CHECK(kept.entities[1].source_surface == "Anna");
  CHECK(is_iob2(kept.sentence.tags));
}

TEST_CASE("stats account for every pair") {
  const auto all = fixtures::projection_fixtures();
  ProjectionStats stats;
  for (const auto& fx : all) {
    fixtures::ScriptedAligner aligner(fx.script);
    stats.add(project_sentence(fx.source, fx.target, aligner), "fx");
  }
  CHECK(stats.processed == all.size());
  CHECK(stats.kept + stats.discarded_total() == all.size());
  CHECK(stats.kept_empty == 1);
  CHECK(stats.discarded.at(DiscardReason::AlignmentFailure) == 3);
  CHECK(stats.discarded.at(DiscardReason::InconsistentMultiMap) == 3);
  CHECK(stats.discarded.at(DiscardReason::Overlap) == 2);

  ProjectionStats a, b;
  for (std::size_t i = 0; i < all.size(); ++i) {
    fixtures::ScriptedAligner aligner(all[i].script);
    (i % 2 ? a : b).add(project_sentence(all[i].source, all[i].target, aligner), "fx");
  }
  ProjectionStats ab = a, ba = b;
  ab.merge(b);
  ba.merge(a);
  CHECK(ab == stats);
  CHECK(ba == stats);
}

TEST_CASE("build_pseudo_dataset") {
  const auto& w = testutil::world();
  const LexicalAligner aligner(w.parallel.lexicon, AlignerConfig{});

  SUBCASE("no pairs") {
    const auto ds = build_pseudo_dataset({}, w.teacher, aligner, ProjectionConfig{});
    CHECK(ds.sentences.empty());
    CHECK(ds.stats == ProjectionStats{});
  }
  SUBCASE("synthetic pairs keep >= 95% and parallel equals serial") {
    const std::vector<ParallelPair> pairs(w.parallel.pairs.begin(), w.parallel.pairs.begin() + 200);
    const auto ds = build_pseudo_dataset(pairs, w.teacher, aligner, ProjectionConfig{});
    MESSAGE("kept " << ds.stats.kept << " of 200");
    CHECK(ds.stats.processed == 200);
    CHECK(ds.stats.kept + ds.stats.discarded_total() == 200);
    CHECK(ds.stats.kept >= 190);
    CHECK(ds.cursor == 200);
    const auto ser = build_pseudo_dataset_serial(pairs, w.teacher, aligner, ProjectionConfig{});
    CHECK(ser.sentences == ds.sentences);
    CHECK(ser.stats == ds.stats);
    for (std::size_t i = 1; i < ds.sentences.size(); ++i) CHECK(ds.sentences[i - 1].pair_id < ds.sentences[i].pair_id);
    for (const auto& s : ds.sentences) CHECK(is_iob2(s.sentence.tags));
  }
  SUBCASE("MISC suppression removes the type from the output") {
    const std::vector<ParallelPair> pairs(w.parallel.pairs.begin(), w.parallel.pairs.begin() + 200);
    ProjectionConfig cfg;
    cfg.suppress_types = {"MISC"};
    const auto ds = build_pseudo_dataset(pairs, w.teacher, aligner, cfg);
    for (const auto& s : ds.sentences) {
      for (const auto& t : s.sentence.tags) CHECK(t.find("MISC") == std::string::npos);
    }
    CHECK(ds.stats.entity_counts.at("synthetic").count("MISC") == 0);
    const auto with = build_pseudo_dataset(pairs, w.teacher, aligner, ProjectionConfig{});
    CHECK(with.stats.entity_counts.at("synthetic").at("MISC") > 0);
  }
  SUBCASE("interrupted run resumes to the same result") {
    const std::vector<ParallelPair> pairs(w.parallel.pairs.begin(), w.parallel.pairs.begin() + 120);
    const auto full = build_pseudo_dataset(pairs, w.teacher, aligner, ProjectionConfig{});
    // Poison a pair that has at least one entity so the aligner is queried.
    std::size_t victim = 70;
    while (decode_spans(predict(w.teacher, pairs[victim].source).tags).empty()) ++victim;
    FlakyAligner flaky(aligner, pairs[victim].target);
    PseudoDataset partial;
    try {
      build_pseudo_dataset(pairs, w.teacher, flaky, ProjectionConfig{});
      FAIL("no throw");
    } catch (const ProjectionInterrupted& e) {
      CHECK(e.kind() == ErrorKind::Transport);
      partial = e.partial();
    }
    CHECK(partial.cursor == victim);
    CHECK(partial.stats.processed == victim);
    flaky.disarm();
    const auto resumed = build_pseudo_dataset(pairs, w.teacher, flaky, ProjectionConfig{}, partial);
    CHECK(resumed.sentences == full.sentences);
    CHECK(resumed.stats == full.stats);
  }
}

TEST_CASE("oracle teacher with a perfect aligner reproduces target gold") {
  SynthSpec spec;
  spec.reorder_prob = 0;
  const auto c = gen_synthetic_corpus(spec, 500, 31);
  const LexicalAligner aligner(c.lexicon, AlignerConfig{});
  const auto ds = project_labeled(c.pairs, c.source_gold, aligner, ProjectionConfig{});
  CHECK(ds.stats.kept == 500);
  std::size_t mismatches = 0;
  for (const auto& s : ds.sentences) mismatches += s.sentence == c.target_gold[s.pair_id] ? 0 : 1;
  CHECK(mismatches == 0);
}

TEST_CASE("balance_empty_ratio") {
  SUBCASE("50 empty + 50 non-empty at 0.2 keeps 12 empties") {
    const auto out = balance_empty_ratio({{"d", mixed("d", 50, 50)}}, 0.2, 1);
    CHECK(count_empty(out.at("d")) == 12);
    CHECK(out.at("d").size() == 62);
    CHECK(allowed_empties(50, 0.2) == oracle::max_empties(50, 0.2, 1000));
  }
  SUBCASE("no empties is unchanged") {
    const auto in = mixed("d", 0, 10);
    CHECK(balance_empty_ratio({{"d", in}}, 0.3, 1).at("d") == in);
  }
  SUBCASE("ratio 0 drops all empties") {
    const auto out = balance_empty_ratio({{"d", mixed("d", 7, 3)}}, 0.0, 1);
    CHECK(count_empty(out.at("d")) == 0);
    CHECK(out.at("d").size() == 3);
  }
  SUBCASE("ratio 1 is rejected") { CHECK_THROWS_AS(balance_empty_ratio({}, 1.0, 1), Error); }
  SUBCASE("properties against the brute-force bound") {
    Rng rng(3);
    for (int c = 0; c < 200; ++c) {
      const std::size_t e = rng.below(40), n = rng.below(40);
      const double r = rng.below(20) / 20.0;
      const auto in = mixed("a", e, n);
      const auto in_b = mixed("b", n, e);
      const auto out = balance_empty_ratio({{"a", in}, {"b", in_b}}, r, 9);
      for (const auto& [name, src] : std::map<std::string, std::vector<PseudoLabeledSentence>>{{"a", in}, {"b", in_b}}) {
        const auto& got = out.at(name);
        const std::size_t non_empty = src.size() - count_empty(src);
        CHECK(got.size() - count_empty(got) == non_empty);
        CHECK(count_empty(got) == oracle::max_empties(non_empty, r, count_empty(src)));
        CHECK(got.size() <= src.size());
        // Order preserved.
        for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i - 1].pair_id < got[i].pair_id);
      }
      CHECK(out == balance_empty_ratio({{"a", in}, {"b", in_b}}, r, 9));
    }
  }
}
