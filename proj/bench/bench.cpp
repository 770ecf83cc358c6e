// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include "xnf/alignment.hpp"
#include "xnf/corpus_io.hpp"
#include "xnf/projection.hpp"
#include "xnf/tagger.hpp"

using namespace xnf;

namespace {

struct Fixture {
  SyntheticCorpus corpus;
  TaggerModel model{TaggerConfig{}, Vocab{}};
  std::vector<std::vector<std::string>> sentences;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    out.corpus = gen_synthetic_corpus(SynthSpec{}, 2000, 5);
    out.model = TaggerModel::initialized(TaggerConfig{}, build_vocab(out.corpus.source_gold, 1));
    for (const auto& s : out.corpus.source_gold) out.sentences.push_back(s.tokens);
    return out;
  }();
  return f;
}

std::vector<std::vector<std::string>> first(std::size_t n) {
  const auto& all = fixture().sentences;
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n)};
}

void BM_predict_batch(benchmark::State& state) {
  const auto batch = first(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(predict_batch(fixture().model, batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_predict_batch_serial(benchmark::State& state) {
  const auto batch = first(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(predict_batch_serial(fixture().model, batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

std::vector<ParallelPair> pairs(std::size_t n) {
  const auto& all = fixture().corpus.pairs;
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n)};
}

void BM_build_pseudo_dataset(benchmark::State& state) {
  const auto p = pairs(static_cast<std::size_t>(state.range(0)));
  const LexicalAligner aligner(fixture().corpus.lexicon, AlignerConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(build_pseudo_dataset(p, fixture().model, aligner, ProjectionConfig{}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_build_pseudo_dataset_serial(benchmark::State& state) {
  const auto p = pairs(static_cast<std::size_t>(state.range(0)));
  const LexicalAligner aligner(fixture().corpus.lexicon, AlignerConfig{});
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_pseudo_dataset_serial(p, fixture().model, aligner, ProjectionConfig{}));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_predict_batch)->Arg(100)->Arg(2000);
BENCHMARK(BM_predict_batch_serial)->Arg(100)->Arg(2000);
BENCHMARK(BM_build_pseudo_dataset)->Arg(100)->Arg(2000);
BENCHMARK(BM_build_pseudo_dataset_serial)->Arg(100)->Arg(2000);

BENCHMARK_MAIN();
