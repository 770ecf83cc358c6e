#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "helpers.hpp"
#include "oracles.hpp"
#include "xnf/corpus_io.hpp"
#include "xnf/error.hpp"
#include "xnf/lexicon.hpp"
#include "xnf/spans.hpp"

using namespace xnf;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("parse_conll single umlaut token") {
  const auto s = parse_conll("Köln B-LOC\n\n", TypeSet::conll());
  REQUIRE(s.size() == 1);
  CHECK(s[0].tokens == std::vector<std::string>{"Köln"});
  CHECK(s[0].tags == std::vector<std::string>{"B-LOC"});
}

TEST_CASE("parse_conll empty input") {
  CHECK(kind_of([] { parse_conll("", TypeSet::conll()); }) == ErrorKind::EmptyInput);
  CHECK(kind_of([] { parse_conll("\n\n-DOCSTART- -X- O\n\n", TypeSet::conll()); }) == ErrorKind::EmptyInput);
}

TEST_CASE("parse_conll drops DOCSTART and counts sentences") {
  const std::string text =
      "-DOCSTART- -X- -X- O\n\n"
      "EU NNP B-ORG\nrejects VBZ O\nGerman JJ B-MISC\ncall NN O\n\n"
      "Peter NNP B-PER\nBlackburn NNP I-PER\n\n"
      "BRUSSELS NNP B-LOC\n1996-08-22 CD O\n";
  const auto s = parse_conll(text, TypeSet::conll());
  REQUIRE(s.size() == 3);
  CHECK(s[0].tokens.size() == 4);
  CHECK(s[1].tags == std::vector<std::string>{"B-PER", "I-PER"});
  CHECK(s[2].tokens.back() == "1996-08-22");
}

TEST_CASE("parse_conll errors carry line numbers") {
  try {
    parse_conll("a O\nb B-FOO\n", TypeSet::conll());
    FAIL("no throw");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ErrorKind::UnknownTag);
    CHECK(e.line() == 2);
  }
  try {
    parse_conll("a NN O\nb O\n", TypeSet::conll());
    FAIL("no throw");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ErrorKind::MalformedLine);
    CHECK(e.line() == 2);
  }
  CHECK(kind_of([] { parse_conll("loner\n", TypeSet::conll()); }) == ErrorKind::MalformedLine);
  // MISC is unknown once removed from the registry.
  CHECK(kind_of([] { parse_conll("x B-MISC\n", TypeSet::conll().without("MISC")); }) == ErrorKind::UnknownTag);
}

TEST_CASE("parse_conll normalizes IOB1 to IOB2") {
  const auto s = parse_conll("a I-PER\nb I-PER\nc O\nd I-LOC\n", TypeSet::conll());
  CHECK(s[0].tags == std::vector<std::string>{"B-PER", "I-PER", "O", "B-LOC"});
}

TEST_CASE("write_conll basic cases") {
  CHECK(write_conll({}) == "");
  CHECK(write_conll({LabeledSentence{{"a"}, {"O"}}}) == "a O\n\n");
}

TEST_CASE("CoNLL round trip on random sentences") {
  Rng rng(3);
  for (int c = 0; c < 100; ++c) {
    std::vector<LabeledSentence> sents;
    const auto k = 1 + rng.below(5);
    for (std::size_t i = 0; i < k; ++i) sents.push_back(testutil::random_sentence(rng));
    const std::string text = write_conll(sents);
    const auto back = parse_conll(text, TypeSet::conll());
    CHECK(back == sents);
    CHECK(write_conll(back) == text);
  }
}

TEST_CASE("read_parallel") {
  const auto pairs = read_parallel("a b\nc\n", "x\ny z\n", "news");
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[1].target == std::vector<std::string>{"y", "z"});
  CHECK(pairs[1].id == 1);
  CHECK(pairs[0].domain == "news");

  try {
    read_parallel("a\nb\n", "x\ny\nz\n", "news");
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::LineCountMismatch);
    CHECK(std::string(e.what()).find("2") != std::string::npos);
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
  try {
    read_parallel("a\nb\nc\n", "x\n\nz\n", "news");
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyLine);
    CHECK(std::string(e.what()).find("pair 1") != std::string::npos);
  }
}

TEST_CASE("equal-weight quotas") {
  CHECK(equal_weight_quotas({100, 100, 100}, 30) == std::vector<std::size_t>{10, 10, 10});
  CHECK(equal_weight_quotas({4, 100, 100}, 30) == std::vector<std::size_t>{4, 13, 13});
  CHECK(equal_weight_quotas({10}, 5) == std::vector<std::size_t>{5});
}

TEST_CASE("equal-weight quotas match exhaustive max-min search") {
  Rng rng(5);
  for (int c = 0; c < 60; ++c) {
    std::vector<std::size_t> sizes;
    const auto k = 1 + rng.below(3);
    for (std::size_t i = 0; i < k; ++i) sizes.push_back(rng.below(9));
    const std::size_t n = rng.below(20);
    auto q = equal_weight_quotas(sizes, n);
    for (std::size_t i = 0; i < k; ++i) CHECK(q[i] <= sizes[i]);
    std::sort(q.begin(), q.end());
    CHECK(q == oracle::fair_sorted(sizes, n));
  }
}

TEST_CASE("sample_equal_weights") {
  auto corpus = [](const std::string& d, std::size_t n) {
    DomainCorpus c{d, {}};
    for (std::size_t i = 0; i < n; ++i) c.pairs.push_back({{d + std::to_string(i)}, {"t"}, d, i});
    return c;
  };
  SUBCASE("single corpus") { CHECK(sample_equal_weights({corpus("a", 10)}, 5, 1).size() == 5); }
  SUBCASE("deficit redistributed") {
    const auto s = sample_equal_weights({corpus("a", 4), corpus("b", 100), corpus("c", 100)}, 30, 1);
    std::map<std::string, int> per;
    for (const auto& p : s) per[p.domain]++;
    CHECK(per["a"] == 4);
    CHECK(per["b"] == 13);
    CHECK(per["c"] == 13);
  }
  SUBCASE("deterministic and permutation invariant") {
    auto a = corpus("a", 20), b = corpus("b", 20);
    const auto s1 = sample_equal_weights({a, b}, 15, 9);
    CHECK(s1 == sample_equal_weights({a, b}, 15, 9));
    std::reverse(a.pairs.begin(), a.pairs.end());
    Rng rng(2);
    rng.shuffle(std::span(b.pairs));
    CHECK(s1 == sample_equal_weights({a, b}, 15, 9));
  }
  SUBCASE("all empty") {
    try {
      sample_equal_weights({corpus("a", 0)}, 5, 1);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::AllCorporaEmpty);
    }
  }
}

TEST_CASE("synthetic corpus properties") {
  SynthSpec spec;
  SUBCASE("entity_rate 0 gives no entities") {
    spec.entity_rate = 0;
    const auto c = gen_synthetic_corpus(spec, 50, 1);
    for (const auto& s : c.source_gold) {
      for (const auto& t : s.tags) CHECK(t == "O");
    }
  }
  SUBCASE("reorder 0 gives positionwise lexicon image") {
    spec.reorder_prob = 0;
    const auto c = gen_synthetic_corpus(spec, 50, 2);
    for (std::size_t i = 0; i < c.pairs.size(); ++i) {
      const auto& p = c.pairs[i];
      REQUIRE(p.source.size() == p.target.size());
      for (std::size_t k = 0; k < p.source.size(); ++k) CHECK(c.lexicon.contains(p.source[k], p.target[k]));
      CHECK(c.target_gold[i].tags == c.source_gold[i].tags);
    }
  }
  SUBCASE("deterministic") {
    const auto a = gen_synthetic_corpus(spec, 30, 4);
    const auto b = gen_synthetic_corpus(spec, 30, 4);
    CHECK(a.source_gold == b.source_gold);
    CHECK(a.pairs == b.pairs);
    CHECK(a.lexicon.entries() == b.lexicon.entries());
  }
  SUBCASE("target entities are contiguous lexicon images of source entities") {
    const auto c = gen_synthetic_corpus(spec, 200, 6);
    for (std::size_t i = 0; i < c.pairs.size(); ++i) {
      const auto src = decode_spans(c.source_gold[i].tokens, c.source_gold[i].tags);
      const auto tgt = decode_spans(c.target_gold[i].tokens, c.target_gold[i].tags);
      REQUIRE(src.size() == tgt.size());
      CHECK(c.target_gold[i].tokens == c.pairs[i].target);
      for (std::size_t k = 0; k < src.size(); ++k) {
        CHECK(tgt[k].type == src[k].type);
        REQUIRE(tgt[k].length() == src[k].length());
        for (std::size_t j = 0; j < src[k].length(); ++j) {
          CHECK(c.lexicon.contains(c.source_gold[i].tokens[src[k].start + j], c.target_gold[i].tokens[tgt[k].start + j]));
        }
      }
    }
  }
  SUBCASE("validation") {
    spec.vocab_size = 10;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = SynthSpec{};
    spec.entity_rate = 1.5;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = SynthSpec{};
    spec.type_weights = {{"PER", 0.0}};
    CHECK_THROWS_AS(spec.validate(), Error);
  }
}

TEST_CASE("lexicon TSV") {
  Lexicon lex;
  lex.add("Cologne", "Köln");
  lex.add("New York", "Nueva York");
  CHECK(lex.lookup("cologne") == std::vector<std::string>{"Köln"});
  CHECK(lex.contains("COLOGNE", "köln"));
  const auto back = Lexicon::from_tsv(lex.to_tsv());
  CHECK(back.entries() == lex.entries());
  try {
    Lexicon::from_tsv("a\tb\nno tab here\n");
    FAIL("no throw");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(Lexicon::from_tsv("a\t\n"), ParseError);
}
