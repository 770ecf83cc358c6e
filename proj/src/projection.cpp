#include "xnf/projection.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "xnf/hash.hpp"
#include "xnf/rng.hpp"
#include "xnf/text.hpp"

namespace xnf {

std::string_view to_string(DiscardReason reason) {
  switch (reason) {
    case DiscardReason::AlignmentFailure: return "AlignmentFailure";
    case DiscardReason::Overlap: return "Overlap";
    case DiscardReason::InconsistentMultiMap: return "InconsistentMultiMap";
  }
  return "Unknown";
}

ProjectionOutcome project_sentence(const LabeledSentence& source, const std::vector<std::string>& target_tokens,
                                   const Aligner& aligner) {
  const auto source_spans = decode_spans(source.tokens, source.tags);
  std::vector<AlignmentResult> results;
  results.reserve(source_spans.size());
  for (const auto& s : source_spans) {
    results.push_back(aligner.align(AlignmentQuery{s.surface, target_tokens}));
    if (results.back().empty()) return DiscardReason::AlignmentFailure;
  }

  std::vector<ProjectedEntity> collected;
  for (std::size_t k = 0; k < source_spans.size(); ++k) {
    const auto& spans = results[k].spans;
    const std::string first = text::casefold_utf8(span_surface(target_tokens, spans.front().start, spans.front().end));
    for (const auto& a : spans) {
      if (text::casefold_utf8(span_surface(target_tokens, a.start, a.end)) != first) {
        return DiscardReason::InconsistentMultiMap;
      }
    }
    for (const auto& a : spans) {
      EntitySpan t{a.start, a.end, source_spans[k].type, span_surface(target_tokens, a.start, a.end)};
      bool duplicate = std::any_of(collected.begin(), collected.end(),
                                   [&](const ProjectedEntity& e) { return e.target.same_extent(t); });
      if (!duplicate) collected.push_back({std::move(t), source_spans[k].surface, a.score});
    }
  }

  std::sort(collected.begin(), collected.end(), [](const ProjectedEntity& a, const ProjectedEntity& b) {
    return a.target.start < b.target.start || (a.target.start == b.target.start && a.target.end < b.target.end);
  });
  for (std::size_t i = 1; i < collected.size(); ++i) {
    if (collected[i - 1].target.overlaps(collected[i].target)) return DiscardReason::Overlap;
  }

  std::vector<EntitySpan> spans;
  for (const auto& e : collected) spans.push_back(e.target);
  PseudoLabeledSentence out;
  out.sentence.tokens = target_tokens;
  out.sentence.tags = encode_spans(spans, target_tokens.size());
  out.entities = std::move(collected);
  return out;
}

std::size_t ProjectionStats::discarded_total() const {
  std::size_t total = 0;
  for (const auto& [reason, count] : discarded) total += count;
  return total;
}

void ProjectionStats::add(const ProjectionOutcome& outcome, const std::string& domain) {
  ++processed;
  if (const auto* reason = std::get_if<DiscardReason>(&outcome)) {
    ++discarded[*reason];
    return;
  }
  const auto& kept_sentence = std::get<PseudoLabeledSentence>(outcome);
  ++kept;
  if (kept_sentence.is_empty()) ++kept_empty;
  auto& row = entity_counts[domain];
  for (const auto& e : kept_sentence.entities) ++row[e.target.type];
}

void ProjectionStats::merge(const ProjectionStats& other) {
  processed += other.processed;
  kept += other.kept;
  kept_empty += other.kept_empty;
  for (const auto& [reason, count] : other.discarded) discarded[reason] += count;
  for (const auto& [domain, row] : other.entity_counts) {
    for (const auto& [type, count] : row) entity_counts[domain][type] += count;
  }
}

namespace {

LabeledSentence prepare_source(LabeledSentence tagged, const ProjectionConfig& cfg) {
  for (const auto& t : cfg.suppress_types) tagged = suppress_type(tagged, t);
  return tagged;
}

ProjectionOutcome project_pair(const ParallelPair& pair, const LabeledSentence& source, const Aligner& aligner) {
  auto outcome = project_sentence(source, pair.target, aligner);
  if (auto* kept = std::get_if<PseudoLabeledSentence>(&outcome)) {
    kept->pair_id = pair.id;
    kept->domain = pair.domain;
  }
  return outcome;
}

// Folds outcomes [resume.cursor, resume.cursor + outcomes) in input order,
// stopping at the first error.
PseudoDataset fold(const std::vector<ParallelPair>& pairs, PseudoDataset state,
                   std::vector<std::optional<ProjectionOutcome>>& outcomes,
                   const std::vector<std::exception_ptr>& errors) {
  const std::size_t base = state.cursor;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    if (errors[k]) {
      try {
        std::rethrow_exception(errors[k]);
      } catch (const Error& e) {
        throw ProjectionInterrupted(e.kind(), "pair " + std::to_string(base + k) + ": " + e.detail(), std::move(state));
      }
    }
    const auto& pair = pairs[base + k];
    state.stats.add(*outcomes[k], pair.domain);
    if (auto* kept = std::get_if<PseudoLabeledSentence>(&*outcomes[k])) state.sentences.push_back(std::move(*kept));
    state.cursor = base + k + 1;
  }
  return state;
}

PseudoDataset run_projection(const std::vector<ParallelPair>& pairs, const std::vector<LabeledSentence>& tagged,
                             const Aligner& aligner, const ProjectionConfig& cfg, PseudoDataset resume,
                             bool parallel) {
  const std::size_t base = resume.cursor;
  const std::size_t count = pairs.size() - base;
  std::vector<std::optional<ProjectionOutcome>> outcomes(count);
  std::vector<std::exception_ptr> errors(count);

  auto work = [&](std::size_t k) {
    try {
      outcomes[k] = project_pair(pairs[base + k], prepare_source(tagged[k], cfg), aligner);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };

  if (parallel) {
    int threads = 1;
#ifdef _OPENMP
    threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(omp_get_max_threads()),
                                                     aligner.max_concurrency()));
#endif
    const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic, 8) num_threads(threads)
    for (std::ptrdiff_t k = 0; k < n; ++k) work(static_cast<std::size_t>(k));
  } else {
    for (std::size_t k = 0; k < count; ++k) work(k);
  }
  return fold(pairs, std::move(resume), outcomes, errors);
}

std::vector<LabeledSentence> tag_sources(const std::vector<ParallelPair>& pairs, std::size_t from,
                                         const TaggerModel& teacher, bool parallel) {
  std::vector<std::vector<std::string>> sources;
  sources.reserve(pairs.size() - from);
  for (std::size_t i = from; i < pairs.size(); ++i) sources.push_back(pairs[i].source);
  return parallel ? predict_batch(teacher, sources) : predict_batch_serial(teacher, sources);
}

void check_resume(const std::vector<ParallelPair>& pairs, const PseudoDataset& resume) {
  if (resume.cursor > pairs.size()) throw Error(ErrorKind::InvalidSpec, "resume cursor past the end of the pairs");
}

}  // namespace

PseudoDataset build_pseudo_dataset(const std::vector<ParallelPair>& pairs, const TaggerModel& teacher,
                                   const Aligner& aligner, const ProjectionConfig& cfg, PseudoDataset resume) {
  check_resume(pairs, resume);
  auto tagged = tag_sources(pairs, resume.cursor, teacher, true);
  return run_projection(pairs, tagged, aligner, cfg, std::move(resume), true);
}

PseudoDataset build_pseudo_dataset_serial(const std::vector<ParallelPair>& pairs, const TaggerModel& teacher,
                                          const Aligner& aligner, const ProjectionConfig& cfg,
                                          PseudoDataset resume) {
  check_resume(pairs, resume);
  auto tagged = tag_sources(pairs, resume.cursor, teacher, false);
  return run_projection(pairs, tagged, aligner, cfg, std::move(resume), false);
}

PseudoDataset project_labeled(const std::vector<ParallelPair>& pairs, const std::vector<LabeledSentence>& source_tags,
                              const Aligner& aligner, const ProjectionConfig& cfg) {
  if (pairs.size() != source_tags.size()) throw Error(ErrorKind::ShapeMismatch, "pairs and source tags differ in count");
  return run_projection(pairs, source_tags, aligner, cfg, {}, true);
}

std::size_t allowed_empties(std::size_t non_empty, double target_ratio) {
  if (target_ratio <= 0.0) return 0;
  // empty / (empty + non_empty) <= r  <=>  empty <= r * non_empty / (1 - r)
  const double bound = target_ratio * static_cast<double>(non_empty) / (1.0 - target_ratio);
  auto k = static_cast<std::size_t>(std::floor(bound + 1e-9));
  while (k > 0 && static_cast<double>(k) > target_ratio * static_cast<double>(k + non_empty)) --k;
  return k;
}

DomainDatasets balance_empty_ratio(const DomainDatasets& datasets, double target_ratio, std::uint64_t seed) {
  if (!(target_ratio >= 0.0 && target_ratio < 1.0)) throw Error(ErrorKind::InvalidSpec, "target ratio must be in [0,1)");
  DomainDatasets out;
  for (const auto& [domain, data] : datasets) {
    std::vector<std::size_t> empties;
    std::size_t non_empty = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i].is_empty()) {
        empties.push_back(i);
      } else {
        ++non_empty;
      }
    }
    const std::size_t keep = std::min(empties.size(), allowed_empties(non_empty, target_ratio));
    std::vector<bool> keep_flag(data.size(), true);
    if (keep < empties.size()) {
      Rng rng(Rng::mix(seed, fnv1a64(domain)));
      rng.shuffle(std::span(empties));
      for (std::size_t j = keep; j < empties.size(); ++j) keep_flag[empties[j]] = false;
    }
    auto& dst = out[domain];
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (keep_flag[i]) dst.push_back(data[i]);
    }
  }
  return out;
}

DomainDatasets split_by_domain(const std::vector<PseudoLabeledSentence>& sentences) {
  DomainDatasets out;
  for (const auto& s : sentences) out[s.domain].push_back(s);
  return out;
}

std::vector<LabeledSentence> sentences_of(const std::vector<PseudoLabeledSentence>& data) {
  std::vector<LabeledSentence> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back(s.sentence);
  return out;
}

}  // namespace xnf
