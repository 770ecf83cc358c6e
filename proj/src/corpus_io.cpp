#include "xnf/corpus_io.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

#include "xnf/error.hpp"
#include "xnf/rng.hpp"
#include "xnf/spans.hpp"
#include "xnf/text.hpp"

namespace xnf {

std::vector<LabeledSentence> parse_conll(std::string_view text, const TypeSet& types) {
  if (text.empty()) throw Error(ErrorKind::EmptyInput, "no CoNLL content");
  std::vector<LabeledSentence> sentences;
  LabeledSentence current;
  std::size_t columns = 0;

  auto flush = [&] {
    if (current.tokens.empty()) return;
    current.tags = repair_iob2(std::move(current.tags));
    sentences.push_back(std::move(current));
    current = {};
  };

  auto lines = text::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    auto cols = text::split_ws(lines[i]);
    if (cols.empty()) {
      flush();
      continue;
    }
    if (cols[0].starts_with("-DOCSTART-")) {
      flush();
      continue;
    }
    if (cols.size() < 2) throw ParseError(ErrorKind::MalformedLine, lineno, "expected token and tag");
    if (columns == 0) columns = cols.size();
    if (cols.size() != columns) {
      throw ParseError(ErrorKind::MalformedLine, lineno,
                       "expected " + std::to_string(columns) + " columns, got " + std::to_string(cols.size()));
    }
    auto tag = parse_tag(cols.back());
    if (!tag || (tag->prefix != TagPrefix::Outside && !types.contains(tag->type))) {
      throw ParseError(ErrorKind::UnknownTag, lineno, "tag '" + std::string(cols.back()) + "'");
    }
    current.tokens.emplace_back(cols.front());
    current.tags.emplace_back(cols.back());
  }
  flush();
  if (sentences.empty()) throw Error(ErrorKind::EmptyInput, "no sentences in CoNLL content");
  return sentences;
}

std::string write_conll(const std::vector<LabeledSentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out += s.tokens[i];
      out += ' ';
      out += s.tags[i];
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

std::vector<ParallelPair> read_parallel(std::string_view source_text, std::string_view target_text,
                                        const std::string& domain) {
  if (domain.empty() || domain.find_first_of(" \t\n") != std::string::npos) {
    throw Error(ErrorKind::InvalidSpec, "bad domain label '" + domain + "'");
  }
  auto src = text::split_lines(source_text);
  auto tgt = text::split_lines(target_text);
  if (src.size() != tgt.size()) {
    throw Error(ErrorKind::LineCountMismatch,
                "source has " + std::to_string(src.size()) + " lines, target has " + std::to_string(tgt.size()));
  }
  std::vector<ParallelPair> pairs;
  pairs.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    ParallelPair p;
    for (auto tok : text::split_ws(src[i])) p.source.emplace_back(tok);
    for (auto tok : text::split_ws(tgt[i])) p.target.emplace_back(tok);
    if (p.source.empty() || p.target.empty()) {
      throw Error(ErrorKind::EmptyLine, "pair " + std::to_string(i) + " has an empty side");
    }
    p.domain = domain;
    p.id = i;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<std::size_t> equal_weight_quotas(const std::vector<std::size_t>& sizes, std::size_t n) {
  std::vector<std::size_t> quota(sizes.size(), 0);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] > 0) active.push_back(i);
  }
  std::size_t remaining = n;
  // Water-filling: saturate every domain whose size is below the current even
  // share, then re-split what is left.
  while (!active.empty() && remaining > 0) {
    const std::size_t share = remaining / active.size();
    std::vector<std::size_t> still;
    for (std::size_t idx : active) {
      if (sizes[idx] <= share) {
        quota[idx] = sizes[idx];
        remaining -= sizes[idx];
      } else {
        still.push_back(idx);
      }
    }
    if (still.size() == active.size()) {
      std::size_t extra = remaining % active.size();
      for (std::size_t k = 0; k < active.size(); ++k) {
        quota[active[k]] = share + (k < extra ? 1 : 0);
      }
      remaining = 0;
      break;
    }
    active = std::move(still);
  }
  return quota;
}

std::vector<ParallelPair> sample_equal_weights(const std::vector<DomainCorpus>& corpora, std::size_t n,
                                               std::uint64_t seed) {
  std::vector<std::size_t> sizes;
  for (const auto& c : corpora) sizes.push_back(c.pairs.size());
  if (std::all_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s == 0; })) {
    throw Error(ErrorKind::AllCorporaEmpty, "nothing to sample from");
  }
  auto quota = equal_weight_quotas(sizes, n);

  std::vector<ParallelPair> out;
  for (std::size_t d = 0; d < corpora.size(); ++d) {
    if (quota[d] == 0) continue;
    // Canonical order first so the draw depends only on the multiset of pairs.
    std::vector<const ParallelPair*> sorted;
    for (const auto& p : corpora[d].pairs) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(), [](const ParallelPair* a, const ParallelPair* b) {
      return std::tie(a->id, a->source, a->target, a->domain) < std::tie(b->id, b->source, b->target, b->domain);
    });
    Rng rng(Rng::mix(seed, d + 1));
    rng.shuffle(std::span(sorted));
    for (std::size_t k = 0; k < quota[d]; ++k) out.push_back(*sorted[k]);
  }
  Rng rng(seed);
  rng.shuffle(std::span(out));
  return out;
}

}  // namespace xnf
