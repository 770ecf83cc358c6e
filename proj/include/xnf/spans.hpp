#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xnf/types.hpp"

namespace xnf {

// Half-open token interval [start, end) carrying an entity type.
struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;
  std::string surface;

  std::size_t length() const { return end - start; }
  bool overlaps(const EntitySpan& o) const { return start < o.end && o.start < end; }
  bool same_extent(const EntitySpan& o) const {
    return start == o.start && end == o.end && type == o.type;
  }
  bool operator==(const EntitySpan&) const = default;
};

enum class TagPrefix { Outside, Begin, Inside };

struct Tag {
  TagPrefix prefix = TagPrefix::Outside;
  std::string type;
};

// Syntactic parse of "O", "B-T", "I-T". Returns nullopt for anything else.
std::optional<Tag> parse_tag(std::string_view tag);
std::string begin_tag(std::string_view type);
std::string inside_tag(std::string_view type);

bool is_iob2(const std::vector<std::string>& tags);

// Rewrites every dangling I-T (not continuing a T span) to B-T.
std::vector<std::string> repair_iob2(std::vector<std::string> tags);

// Lenient BIO decoding: a dangling I-T opens a new span. Surfaces are empty.
std::vector<EntitySpan> decode_spans(const std::vector<std::string>& tags);

// Same, with surfaces filled from tokens (space-joined).
std::vector<EntitySpan> decode_spans(const std::vector<std::string>& tokens,
                                     const std::vector<std::string>& tags);

// Throws InvalidSpan for spans outside [0, length) and OverlappingSpans when
// two spans intersect.
std::vector<std::string> encode_spans(const std::vector<EntitySpan>& spans, std::size_t length);

LabeledSentence suppress_type(const LabeledSentence& sentence, std::string_view type);

std::string span_surface(const std::vector<std::string>& tokens, std::size_t start, std::size_t end);

}  // namespace xnf
