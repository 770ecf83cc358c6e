#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "xnf/error.hpp"
#include "xnf/evalkit.hpp"
#include "xnf/spans.hpp"
#include "xnf/tagger.hpp"

using namespace xnf;

namespace {

TaggerConfig tiny_config(std::uint64_t seed = 1) {
  TaggerConfig c;
  c.embed_dim = 4;
  c.window = 1;
  c.hidden_dim = 6;
  c.seed = seed;
  return c;
}

std::vector<LabeledSentence> toy_data() {
  return {{{"Anna", "lives", "in", "Rome"}, {"B-PER", "O", "O", "B-LOC"}},
          {{"Bo", "works", "at", "Acme", "Corp"}, {"B-PER", "O", "O", "B-ORG", "I-ORG"}},
          {{"in", "Rome"}, {"O", "B-LOC"}}};
}

}  // namespace

TEST_CASE("build_vocab") {
  const std::vector<LabeledSentence> c = {{{"a", "a", "b"}, {"O", "O", "O"}}};
  const auto v = build_vocab(c, 1);
  CHECK(v.id("<pad>") == 0);
  CHECK(v.id("<unk>") == 1);
  CHECK(v.id("a") == 2);
  CHECK(v.id("b") == 3);
  CHECK(v.id("zzz") == Vocab::kUnk);
  const auto v2 = build_vocab(c, 2);
  CHECK(v2.id("b") == Vocab::kUnk);
  CHECK(v2.size() == 3);
  CHECK(build_vocab(c, 1) == v);
  CHECK(Vocab::from_tsv(v.to_tsv()) == v);
  try {
    build_vocab({}, 1);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyCorpus);
  }
}

TEST_CASE("forward distributions") {
  const auto data = toy_data();
  const auto m = TaggerModel::initialized(tiny_config(), build_vocab(data, 1));
  for (const auto& s : data) {
    for (const auto& d : forward(m, s.tokens)) {
      double sum = 0;
      for (double p : d) sum += p;
      CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
  }
  SUBCASE("zero model is uniform and predicts the lowest label") {
    const TaggerModel zero(tiny_config(), build_vocab(data, 1));
    const auto d = forward(zero, {"Anna", "x"});
    for (const auto& row : d) {
      for (double p : row) CHECK(p == doctest::Approx(1.0 / zero.num_labels()));
    }
    CHECK(predict(zero, {"Anna", "x"}).tags == std::vector<std::string>{"O", "O"});
  }
  SUBCASE("single token uses padding on both sides") {
    const auto d = forward(m, {"Rome"});
    REQUIRE(d.size() == 1);
    for (double p : d[0]) CHECK(std::isfinite(p));
  }
}

TEST_CASE("training contracts") {
  const auto data = toy_data();
  const auto init = TaggerModel::initialized(tiny_config(), build_vocab(data, 1));
  SUBCASE("lr 0 leaves parameters unchanged") {
    TrainConfig cfg;
    cfg.learning_rate = 0;
    cfg.epochs = 3;
    const auto r = train(init, data, cfg);
    CHECK(r.model == init);
    CHECK(r.loss_history[0] == doctest::Approx(r.loss_history[2]).epsilon(1e-12));
  }
  SUBCASE("negative lr is rejected") {
    TrainConfig cfg;
    cfg.learning_rate = -0.1;
    CHECK_THROWS_AS(train(init, data, cfg), Error);
  }
  SUBCASE("freeze keeps embeddings bit-identical") {
    TrainConfig cfg;
    cfg.freeze_embeddings = true;
    const auto r = train(init, data, cfg);
    CHECK(r.model.embeddings == init.embeddings);
    CHECK(r.model.hidden_w != init.hidden_w);
  }
  SUBCASE("deterministic given seed") {
    TrainConfig cfg;
    cfg.loss = LossKind::reweighted(4);
    CHECK(train(init, data, cfg).model == train(init, data, cfg).model);
  }
  SUBCASE("RW gamma 0 equals CE bit for bit") {
    TrainConfig a, b;
    a.loss = LossKind::cross_entropy();
    b.loss = LossKind::reweighted(0);
    CHECK(train(init, data, a).model == train(init, data, b).model);
  }
  SUBCASE("non-finite loss aborts") {
    TrainConfig cfg;
    cfg.learning_rate = 1e200;
    try {
      train(init, data, cfg);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NonFiniteLoss);
      CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
  }
}

TEST_CASE("descent on a 50-sentence synthetic set") {
  const auto c = gen_synthetic_corpus(SynthSpec{}, 50, 3);
  const auto init = TaggerModel::initialized(TaggerConfig{}, build_vocab(c.source_gold, 1));
  TrainConfig cfg;
  cfg.epochs = 10;
  const auto r = train(init, c.source_gold, cfg);
  REQUIRE(r.loss_history.size() == 10);
  CHECK(r.loss_history.back() < r.loss_history.front());
}

TEST_CASE("memorizes one sentence") {
  const LabeledSentence s{{"Acme", "Corp", "hired", "Anna", "Smith"}, {"B-ORG", "I-ORG", "O", "B-PER", "I-PER"}};
  const auto init = TaggerModel::initialized(TaggerConfig{}, build_vocab({s}, 1));
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 0.5;
  const auto m = train(init, {s}, cfg).model;
  CHECK(predict(m, s.tokens).tags == s.tags);
}

TEST_CASE("predictions are IOB2 and batch agrees with serial") {
  const auto& w = testutil::world();
  std::vector<std::vector<std::string>> sents;
  for (const auto& p : w.parallel.pairs) sents.push_back(p.target);
  const auto par = predict_batch(w.teacher, sents);
  const auto ser = predict_batch_serial(w.teacher, sents);
  CHECK(par == ser);
  for (std::size_t i = 0; i < 50; ++i) CHECK(ser[i] == predict(w.teacher, sents[i]));
  for (const auto& s : par) CHECK(is_iob2(s.tags));
}

TEST_CASE("gradient check on small models") {
  Rng rng(2);
  for (const auto& k : {LossKind::cross_entropy(), LossKind::focal(2), LossKind::reweighted(4)}) {
    for (int c = 0; c < 5; ++c) {
      auto s = testutil::random_sentence(rng, 6);
      const auto m = TaggerModel::initialized(tiny_config(rng.next()), build_vocab({s}, 1));
      REQUIRE(m.parameter_count() <= 5000);
      CHECK(gradient_check(m, s, k) < 1e-4);
    }
  }
}

TEST_CASE("teacher reaches 0.90 on reorder-free synthetic data within 20 epochs") {
  SynthSpec spec;
  spec.reorder_prob = 0;
  const auto c = gen_synthetic_corpus(spec, 600, 21);
  const std::vector<LabeledSentence> train_set(c.source_gold.begin(), c.source_gold.begin() + 500);
  const std::vector<LabeledSentence> held_out(c.source_gold.begin() + 500, c.source_gold.end());
  // Pipeline teacher settings with the longer budget.
  TrainConfig cfg = testutil::teacher_config();
  cfg.epochs = 20;
  const auto m = train(TaggerModel::initialized(TaggerConfig{}, build_vocab(train_set, 1)), train_set, cfg).model;
  const double f1 = evaluate_model(m, held_out).micro.f1;
  MESSAGE("held-out F1 " << f1);
  CHECK(f1 >= 0.90);
}

TEST_CASE("vocabulary remap for the student") {
  const auto data = toy_data();
  const auto teacher = TaggerModel::initialized(tiny_config(), build_vocab(data, 1));
  const std::vector<LabeledSentence> target = {{{"Rome", "neu"}, {"B-LOC", "O"}}};
  const auto student = remap_vocab(teacher, build_vocab(target, 1), 5);
  CHECK(student.hidden_w == teacher.hidden_w);
  CHECK(student.output_b == teacher.output_b);
  const std::size_t E = teacher.config.embed_dim;
  auto row = [E](const TaggerModel& m, std::size_t id) {
    return std::vector<double>(m.embeddings.begin() + id * E, m.embeddings.begin() + (id + 1) * E);
  };
  CHECK(row(student, student.vocab.id("Rome")) == row(teacher, teacher.vocab.id("Rome")));
  CHECK(row(student, Vocab::kUnk) == row(teacher, Vocab::kUnk));
  for (double x : row(student, student.vocab.id("neu"))) CHECK(std::abs(x) <= 0.1);
  CHECK(remap_vocab(teacher, build_vocab(target, 1), 5) == student);
}

TEST_CASE("model serialization round trip") {
  const auto data = toy_data();
  const auto m = TaggerModel::initialized(tiny_config(9), build_vocab(data, 1));
  const auto bytes = serialize_model(m);
  CHECK(bytes.substr(0, 4) == "XNFT");
  CHECK(deserialize_model(bytes, m.vocab) == m);
  const std::string dir = testutil::temp_dir("model");
  save_model(m, dir + "/m.xnft");
  CHECK(load_model(dir + "/m.xnft") == m);
  CHECK_THROWS_AS(deserialize_model("XNFX" + bytes.substr(4), m.vocab), Error);
  CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() - 3), m.vocab), Error);
}
