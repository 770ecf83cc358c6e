#include <algorithm>
#include <set>
#include <unordered_map>

#include "xnf/corpus_io.hpp"
#include "xnf/error.hpp"
#include "xnf/rng.hpp"
#include "xnf/spans.hpp"
#include "xnf/text.hpp"

namespace xnf {

void SynthSpec::validate() const {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (vocab_size < 50) throw Error(ErrorKind::InvalidSpec, "vocab_size must be >= 50");
  if (!in_unit(entity_rate) || !in_unit(reorder_prob) || !in_unit(name_copy_rate) || !in_unit(repeat_rate)) {
    throw Error(ErrorKind::InvalidSpec, "probabilities must lie in [0,1]");
  }
  if (type_weights.empty()) throw Error(ErrorKind::InvalidSpec, "no entity types");
  bool any_positive = false;
  std::vector<std::string> names;
  for (const auto& [name, w] : type_weights) {
    if (!(w >= 0.0)) throw Error(ErrorKind::InvalidSpec, "negative weight for " + name);
    any_positive |= w > 0.0;
    names.push_back(name);
  }
  TypeSet check(names);  // validates names
  if (!any_positive) throw Error(ErrorKind::InvalidSpec, "all type weights are zero");
  if (domain.empty()) throw Error(ErrorKind::InvalidSpec, "empty domain label");
  if (vocab_size < 8 * type_weights.size() + 20) {
    throw Error(ErrorKind::InvalidSpec, "vocab_size too small for " + std::to_string(type_weights.size()) + " types");
  }
}

namespace {

constexpr std::string_view kSourceConsonants = "bdfgklmnprst";
constexpr std::string_view kTargetConsonants = "chjqvwxyz";
constexpr std::string_view kVowels = "aeiou";
constexpr std::size_t kCuesPerType = 3;

std::string make_word(Rng& rng, std::string_view consonants) {
  std::string w;
  const std::size_t syllables = 1 + rng.below(3);
  for (std::size_t s = 0; s < syllables; ++s) {
    w += consonants[rng.below(consonants.size())];
    w += kVowels[rng.below(kVowels.size())];
  }
  if (rng.bernoulli(0.3)) w += consonants[rng.below(consonants.size())];
  return w;
}

std::vector<std::string> unique_words(Rng& rng, std::string_view consonants, std::size_t count) {
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (words.size() < count) {
    auto w = make_word(rng, consonants);
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

std::string capitalize(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 32);
  return w;
}

// Everything derived from lexicon_seed: word inventories, entity phrases,
// cue words and the bijective source->target word map.
struct Language {
  std::vector<std::string> types;
  std::vector<std::string> filler;
  std::vector<std::vector<std::string>> cues;                  // per type
  std::vector<std::vector<std::vector<std::string>>> phrases;  // per type
  std::unordered_map<std::string, std::string> translate;
  Lexicon lexicon;
};

Language build_language(const SynthSpec& spec) {
  Language lang;
  for (const auto& [name, w] : spec.type_weights) lang.types.push_back(name);
  const std::size_t n_types = lang.types.size();

  Rng rng(spec.lexicon_seed);
  auto source_words = unique_words(rng, kSourceConsonants, spec.vocab_size);
  auto target_words = unique_words(rng, kTargetConsonants, spec.vocab_size);

  const std::size_t n_entity_words = spec.vocab_size / 5;
  const std::size_t per_type = n_entity_words / n_types;
  std::size_t next = 0;
  std::vector<std::vector<std::string>> entity_words(n_types);
  for (std::size_t t = 0; t < n_types; ++t) {
    for (std::size_t k = 0; k < per_type; ++k) {
      entity_words[t].push_back(capitalize(source_words[next]));
      std::string image = rng.bernoulli(spec.name_copy_rate) ? capitalize(source_words[next])
                                                              : capitalize(target_words[next]);
      lang.translate[entity_words[t].back()] = image;
      ++next;
    }
  }
  for (; next < spec.vocab_size; ++next) {
    lang.filler.push_back(source_words[next]);
    lang.translate[source_words[next]] = target_words[next];
  }
  lang.cues.resize(n_types);
  for (std::size_t t = 0; t < n_types; ++t) {
    for (std::size_t k = 0; k < kCuesPerType; ++k) lang.cues[t].push_back(lang.filler[t * kCuesPerType + k]);
  }
  lang.filler.erase(lang.filler.begin(), lang.filler.begin() + static_cast<std::ptrdiff_t>(n_types * kCuesPerType));

  lang.phrases.resize(n_types);
  for (std::size_t t = 0; t < n_types; ++t) {
    const auto& words = entity_words[t];
    for (const auto& w : words) lang.phrases[t].push_back({w});
    for (std::size_t k = 0; k < words.size(); ++k) {
      std::size_t other = rng.below(words.size());
      if (other == k) other = (k + 1) % words.size();
      lang.phrases[t].push_back({words[k], words[other]});
    }
  }

  for (const auto& w : source_words) {
    auto it = lang.translate.find(w);
    if (it != lang.translate.end()) lang.lexicon.add(w, it->second);
    auto cap = lang.translate.find(capitalize(w));
    if (cap != lang.translate.end() && cap->first != w) lang.lexicon.add(cap->first, cap->second);
  }
  for (const auto& per_type_phrases : lang.phrases) {
    for (const auto& phrase : per_type_phrases) {
      if (phrase.size() < 2) continue;
      std::vector<std::string> image;
      for (const auto& w : phrase) image.push_back(lang.translate.at(w));
      lang.lexicon.add(text::join(phrase), text::join(image));
    }
  }
  return lang;
}

std::size_t pick_weighted(Rng& rng, const std::vector<std::pair<std::string, double>>& weights) {
  double total = 0.0;
  for (const auto& [n, w] : weights) total += w;
  double r = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (r < weights[i].second) return i;
    r -= weights[i].second;
  }
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i].second > 0) return i;
  }
  return 0;
}

struct Chunk {
  std::vector<std::string> tokens;
  std::string type;  // empty for filler
};

}  // namespace

SyntheticCorpus gen_synthetic_corpus(const SynthSpec& spec, std::size_t n_sentences, std::uint64_t seed) {
  spec.validate();
  Language lang = build_language(spec);
  SyntheticCorpus out;
  out.lexicon = lang.lexicon;

  Rng rng(seed);
  Rng reorder_rng(Rng::mix(seed, 0x5eed));
  for (std::size_t n = 0; n < n_sentences; ++n) {
    // Groups keep a cue glued to its entity; entities only go into gaps
    // bordered by filler so two mentions never touch.
    std::vector<std::vector<Chunk>> groups;
    std::vector<bool> is_entity;
    const std::size_t filler_len = 4 + rng.below(9);
    for (std::size_t k = 0; k < filler_len; ++k) {
      groups.push_back({{{lang.filler[rng.below(lang.filler.size())]}, {}}});
      is_entity.push_back(false);
    }
    auto insert_entity = [&](std::size_t type_idx, const std::vector<std::string>& phrase) {
      std::vector<Chunk> ins;
      if (rng.bernoulli(0.85)) {
        const auto& cues = lang.cues[type_idx];
        ins.push_back({{cues[rng.below(cues.size())]}, {}});
      }
      ins.push_back({phrase, lang.types[type_idx]});
      std::vector<std::size_t> gaps;
      for (std::size_t g = 0; g <= groups.size(); ++g) {
        if ((g == 0 || !is_entity[g - 1]) && (g == groups.size() || !is_entity[g])) gaps.push_back(g);
      }
      if (gaps.empty()) {
        groups.push_back({{{lang.filler[rng.below(lang.filler.size())]}, {}}});
        is_entity.push_back(false);
        gaps.push_back(groups.size());
      }
      const std::size_t pos = gaps[rng.below(gaps.size())];
      groups.insert(groups.begin() + static_cast<std::ptrdiff_t>(pos), std::move(ins));
      is_entity.insert(is_entity.begin() + static_cast<std::ptrdiff_t>(pos), true);
    };
    // Distinct mentions share no words, so a name never also shows up inside
    // a longer name in the same sentence.
    std::set<std::string> used_words;
    for (int slot = 0; slot < 3; ++slot) {
      if (!rng.bernoulli(spec.entity_rate)) continue;
      std::size_t t = pick_weighted(rng, spec.type_weights);
      const auto& inventory = lang.phrases[t];
      const std::vector<std::string>* pick = nullptr;
      for (int attempt = 0; attempt < 8 && !pick; ++attempt) {
        const auto& cand = inventory[rng.below(inventory.size())];
        if (std::none_of(cand.begin(), cand.end(), [&](const std::string& w) { return used_words.count(w) > 0; })) {
          pick = &cand;
        }
      }
      if (!pick) continue;
      const auto& phrase = *pick;
      used_words.insert(phrase.begin(), phrase.end());
      insert_entity(t, phrase);
      if (rng.bernoulli(spec.repeat_rate)) insert_entity(t, phrase);
    }
    std::vector<Chunk> chunks;
    for (auto& g : groups) chunks.insert(chunks.end(), g.begin(), g.end());

    LabeledSentence src;
    for (const auto& c : chunks) {
      for (std::size_t i = 0; i < c.tokens.size(); ++i) {
        src.tokens.push_back(c.tokens[i]);
        src.tags.push_back(c.type.empty() ? "O" : (i == 0 ? begin_tag(c.type) : inside_tag(c.type)));
      }
    }

    LabeledSentence tgt;
    tgt.tags = src.tags;
    for (const auto& tok : src.tokens) tgt.tokens.push_back(lang.translate.at(tok));
    // Swap adjacent non-entity tokens; entity positions never move.
    for (std::size_t i = 0; i + 1 < tgt.tokens.size();) {
      if (tgt.tags[i] == "O" && tgt.tags[i + 1] == "O" && reorder_rng.bernoulli(spec.reorder_prob)) {
        std::swap(tgt.tokens[i], tgt.tokens[i + 1]);
        i += 2;
      } else {
        ++i;
      }
    }

    out.pairs.push_back(ParallelPair{src.tokens, tgt.tokens, spec.domain, n});
    out.source_gold.push_back(std::move(src));
    out.target_gold.push_back(std::move(tgt));
  }
  return out;
}

}  // namespace xnf
