#include "xnf/alignment.hpp"

#include <algorithm>
#include <set>

#include "xnf/error.hpp"
#include "xnf/text.hpp"

namespace xnf {

void AlignmentQuery::validate() const {
  if (entity_surface.empty()) throw Error(ErrorKind::InvalidSpec, "alignment query has an empty entity");
  if (target_tokens.empty()) throw Error(ErrorKind::InvalidSpec, "alignment query has an empty target");
}

void AlignerConfig::validate() const {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw Error(ErrorKind::InvalidSpec, "aligner threshold must be in (0,1]");
  if (max_span_len < 1) throw Error(ErrorKind::InvalidSpec, "max_span_len must be >= 1");
  if (!(tie_epsilon >= 0.0)) throw Error(ErrorKind::InvalidSpec, "tie_epsilon must be >= 0");
}

AlignmentResult align_lexical(const AlignmentQuery& query, const Lexicon& lexicon, const AlignerConfig& cfg) {
  query.validate();
  std::set<std::string> translations;
  for (const auto& t : lexicon.lookup(query.entity_surface)) translations.insert(text::casefold_utf8(t));
  const std::u32string entity = text::casefold(query.entity_surface);

  std::vector<AlignedSpan> candidates;
  double best = 0.0;
  const auto& toks = query.target_tokens;
  for (std::size_t start = 0; start < toks.size(); ++start) {
    const std::size_t last = std::min(toks.size(), start + cfg.max_span_len);
    std::string surface;
    for (std::size_t end = start + 1; end <= last; ++end) {
      if (end > start + 1) surface += ' ';
      surface += toks[end - 1];
      double score;
      if (translations.count(text::casefold_utf8(surface))) {
        score = 1.0;
      } else {
        const std::u32string folded = text::casefold(surface);
        const std::size_t longest = std::max(entity.size(), folded.size());
        score = 1.0 - static_cast<double>(text::edit_distance(entity, folded)) / static_cast<double>(longest);
      }
      best = std::max(best, score);
      candidates.push_back({start, end, score});
    }
  }

  AlignmentResult result;
  if (best < cfg.threshold) return result;
  const double floor = std::max(cfg.threshold, best - cfg.tie_epsilon);
  std::erase_if(candidates, [floor](const AlignedSpan& s) { return s.score < floor; });
  std::sort(candidates.begin(), candidates.end(), [](const AlignedSpan& a, const AlignedSpan& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.start != b.start) return a.start < b.start;
    return a.end < b.end;
  });
  for (const auto& c : candidates) {
    bool clash = std::any_of(result.spans.begin(), result.spans.end(),
                             [&](const AlignedSpan& s) { return c.start < s.end && s.start < c.end; });
    if (!clash) result.spans.push_back(c);
  }
  std::sort(result.spans.begin(), result.spans.end(),
            [](const AlignedSpan& a, const AlignedSpan& b) { return a.start < b.start; });
  return result;
}

std::vector<AlignedSpan> mask_to_spans(const std::vector<int>& mask, const std::vector<double>* scores) {
  std::vector<AlignedSpan> spans;
  std::size_t i = 0;
  while (i < mask.size()) {
    if (mask[i] != 1) {
      ++i;
      continue;
    }
    std::size_t j = i;
    double sum = 0.0;
    while (j < mask.size() && mask[j] == 1) {
      if (scores) sum += (*scores)[j];
      ++j;
    }
    spans.push_back({i, j, scores ? sum / static_cast<double>(j - i) : 1.0});
    i = j;
  }
  return spans;
}

std::vector<int> spans_to_mask(const std::vector<AlignedSpan>& spans, std::size_t length) {
  std::vector<int> mask(length, 0);
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > length) throw Error(ErrorKind::InvalidSpan, "span outside mask");
    for (std::size_t k = s.start; k < s.end; ++k) mask[k] = 1;
  }
  return mask;
}

}  // namespace xnf
