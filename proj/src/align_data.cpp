#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "xnf/alignment.hpp"
#include "xnf/error.hpp"
#include "xnf/rng.hpp"
#include "xnf/text.hpp"

namespace xnf {

using nlohmann::json;

bool AlignmentExample::is_negative() const {
  return std::none_of(mask.begin(), mask.end(), [](int m) { return m != 0; });
}

std::vector<GoldPair> gold_pairs(const SyntheticCorpus& corpus) {
  std::vector<GoldPair> out;
  out.reserve(corpus.pairs.size());
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    GoldPair g;
    g.pair = corpus.pairs[i];
    g.source_spans = decode_spans(corpus.source_gold[i].tokens, corpus.source_gold[i].tags);
    g.target_spans = decode_spans(corpus.target_gold[i].tokens, corpus.target_gold[i].tags);
    out.push_back(std::move(g));
  }
  return out;
}

namespace {

struct EntityRef {
  std::size_t pair;
  std::size_t entity;
};

AlignmentExample positive(const GoldPair& g, std::size_t k) {
  AlignmentExample ex{g.source_spans[k].surface, g.pair.target, std::vector<int>(g.pair.target.size(), 0)};
  const std::string folded = text::casefold_utf8(ex.entity);
  // Repeated mentions of the same name are all inside the entity.
  for (std::size_t j = 0; j < g.source_spans.size(); ++j) {
    if (text::casefold_utf8(g.source_spans[j].surface) != folded) continue;
    const auto& t = g.target_spans[j];
    for (std::size_t p = t.start; p < t.end; ++p) ex.mask[p] = 1;
  }
  return ex;
}

}  // namespace

std::vector<AlignmentExample> gen_alignment_training_data(const std::vector<GoldPair>& pairs, std::size_t n,
                                                          double negative_frac, std::uint64_t seed,
                                                          const AlignmentDataOptions& options) {
  if (!(negative_frac >= 0.0 && negative_frac <= 1.0) ||
      !(options.noun_phrase_frac >= 0.0 && options.noun_phrase_frac <= 1.0) ||
      negative_frac + options.noun_phrase_frac > 1.0) {
    throw Error(ErrorKind::InvalidSpec, "example fractions must lie in [0,1] and sum to at most 1");
  }
  if (options.noun_phrase_frac > 0.0 && options.lexicon == nullptr) {
    throw Error(ErrorKind::InvalidSpec, "noun-phrase examples need a lexicon");
  }

  std::vector<EntityRef> refs;
  std::set<std::string> pool_set;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& g = pairs[i];
    if (g.source_spans.size() != g.target_spans.size()) {
      throw Error(ErrorKind::InvalidSpec, "pair " + std::to_string(g.pair.id) + " has unmatched gold spans");
    }
    for (std::size_t k = 0; k < g.source_spans.size(); ++k) {
      refs.push_back({i, k});
      pool_set.insert(g.source_spans[k].surface);
    }
  }
  const std::vector<std::string> pool(pool_set.begin(), pool_set.end());

  const auto n_neg = static_cast<std::size_t>(std::llround(static_cast<double>(n) * negative_frac));
  const auto n_np = std::min(n - n_neg, static_cast<std::size_t>(std::llround(static_cast<double>(n) * options.noun_phrase_frac)));
  const std::size_t n_pos = n - n_neg - n_np;
  if ((n_pos > 0 || n_neg > 0) && refs.empty()) {
    throw Error(ErrorKind::InsufficientEntities, "no gold entities to build examples from");
  }

  Rng rng(seed);
  std::vector<AlignmentExample> out;
  out.reserve(n);

  std::vector<EntityRef> order = refs;
  for (std::size_t k = 0; k < n_pos; ++k) {
    if (k % order.size() == 0) rng.shuffle(std::span(order));
    const auto& r = order[k % order.size()];
    out.push_back(positive(pairs[r.pair], r.entity));
  }

  for (std::size_t k = 0; k < n_neg; ++k) {
    const std::size_t first = rng.below(pairs.size());
    bool made = false;
    for (std::size_t step = 0; step < pairs.size() && !made; ++step) {
      const auto& g = pairs[(first + step) % pairs.size()];
      // A fake name must share no word with the source sentence, otherwise
      // its translation may sit inside a longer target name.
      std::set<std::string> present;
      for (const auto& w : g.pair.source) present.insert(text::casefold_utf8(w));
      std::vector<const std::string*> fakes;
      for (const auto& e : pool) {
        const auto words = text::split_ws(e);
        if (std::none_of(words.begin(), words.end(),
                         [&](std::string_view w) { return present.count(text::casefold_utf8(w)) > 0; })) {
          fakes.push_back(&e);
        }
      }
      if (fakes.empty()) continue;
      out.push_back({*fakes[rng.below(fakes.size())], g.pair.target, std::vector<int>(g.pair.target.size(), 0)});
      made = true;
    }
    if (!made) throw Error(ErrorKind::InsufficientEntities, "every entity name occurs in every pair");
  }

  for (std::size_t k = 0; k < n_np; ++k) {
    const std::size_t first = rng.below(pairs.size());
    bool made = false;
    for (std::size_t step = 0; step < pairs.size() && !made; ++step) {
      const auto& g = pairs[(first + step) % pairs.size()];
      std::vector<bool> in_entity(g.pair.source.size(), false);
      for (const auto& s : g.source_spans) {
        for (std::size_t p = s.start; p < s.end; ++p) in_entity[p] = true;
      }
      std::vector<std::pair<std::string, std::vector<int>>> options_here;
      for (std::size_t p = 0; p < g.pair.source.size(); ++p) {
        if (in_entity[p]) continue;
        std::vector<int> mask(g.pair.target.size(), 0);
        bool hit = false;
        for (std::size_t t = 0; t < g.pair.target.size(); ++t) {
          if (options.lexicon->contains(g.pair.source[p], g.pair.target[t])) {
            mask[t] = 1;
            hit = true;
          }
        }
        if (hit) options_here.emplace_back(g.pair.source[p], std::move(mask));
      }
      if (options_here.empty()) continue;
      auto& pick = options_here[rng.below(options_here.size())];
      out.push_back({pick.first, g.pair.target, std::move(pick.second)});
      made = true;
    }
    if (!made) throw Error(ErrorKind::InsufficientEntities, "no lexicon-aligned words for noun-phrase examples");
  }

  rng.shuffle(std::span(out));
  return out;
}

std::string to_jsonl(const std::vector<AlignmentExample>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    json line = {{"entity", ex.entity}, {"tokens", ex.tokens}, {"mask", ex.mask}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<AlignmentExample> from_jsonl(std::string_view body) {
  std::vector<AlignmentExample> out;
  auto lines = text::split_lines(body);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      auto j = json::parse(lines[i]);
      out.push_back({j.at("entity").get<std::string>(), j.at("tokens").get<std::vector<std::string>>(),
                     j.at("mask").get<std::vector<int>>()});
    } catch (const json::exception& e) {
      throw ParseError(ErrorKind::MalformedLine, i + 1, e.what());
    }
  }
  return out;
}

}  // namespace xnf
