#include "xnf/spans.hpp"

#include <algorithm>

#include "xnf/error.hpp"

namespace xnf {

TypeSet::TypeSet(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    const auto& n = names_[i];
    if (n.empty()) throw Error(ErrorKind::InvalidSpec, "empty entity type name");
    for (char c : n) {
      if (!(c >= 'A' && c <= 'Z') && !(c >= '0' && c <= '9') && c != '_') {
        throw Error(ErrorKind::InvalidSpec, "entity type must be uppercase: " + n);
      }
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (names_[j] == n) throw Error(ErrorKind::InvalidSpec, "duplicate entity type " + n);
    }
  }
}

bool TypeSet::contains(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

TypeSet TypeSet::without(std::string_view name) const {
  std::vector<std::string> kept;
  for (const auto& n : names_) {
    if (n != name) kept.push_back(n);
  }
  return TypeSet(std::move(kept));
}

std::optional<Tag> parse_tag(std::string_view tag) {
  if (tag == "O") return Tag{};
  if (tag.size() < 3 || tag[1] != '-') return std::nullopt;
  Tag t;
  if (tag[0] == 'B') {
    t.prefix = TagPrefix::Begin;
  } else if (tag[0] == 'I') {
    t.prefix = TagPrefix::Inside;
  } else {
    return std::nullopt;
  }
  t.type = std::string(tag.substr(2));
  return t;
}

std::string begin_tag(std::string_view type) { return "B-" + std::string(type); }
std::string inside_tag(std::string_view type) { return "I-" + std::string(type); }

bool is_iob2(const std::vector<std::string>& tags) {
  std::string open;  // type of the span continuing into the next token
  for (const auto& raw : tags) {
    auto t = parse_tag(raw);
    if (!t) return false;
    switch (t->prefix) {
      case TagPrefix::Outside:
        open.clear();
        break;
      case TagPrefix::Begin:
        open = t->type;
        break;
      case TagPrefix::Inside:
        if (open != t->type) return false;
        break;
    }
  }
  return true;
}

std::vector<std::string> repair_iob2(std::vector<std::string> tags) {
  std::string open;
  for (auto& raw : tags) {
    auto t = parse_tag(raw);
    if (!t || t->prefix == TagPrefix::Outside) {
      open.clear();
      continue;
    }
    if (t->prefix == TagPrefix::Inside && open != t->type) raw = begin_tag(t->type);
    open = t->type;
  }
  return tags;
}

std::vector<EntitySpan> decode_spans(const std::vector<std::string>& tags) {
  std::vector<EntitySpan> spans;
  bool in_span = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    auto t = parse_tag(tags[i]);
    if (!t || t->prefix == TagPrefix::Outside) {
      in_span = false;
      continue;
    }
    bool continues = t->prefix == TagPrefix::Inside && in_span && spans.back().type == t->type;
    if (continues) {
      spans.back().end = i + 1;
    } else {
      spans.push_back(EntitySpan{i, i + 1, t->type, {}});
      in_span = true;
    }
  }
  return spans;
}

std::string span_surface(const std::vector<std::string>& tokens, std::size_t start, std::size_t end) {
  std::string s;
  for (std::size_t i = start; i < end && i < tokens.size(); ++i) {
    if (i > start) s += ' ';
    s += tokens[i];
  }
  return s;
}

std::vector<EntitySpan> decode_spans(const std::vector<std::string>& tokens,
                                     const std::vector<std::string>& tags) {
  auto spans = decode_spans(tags);
  for (auto& s : spans) s.surface = span_surface(tokens, s.start, s.end);
  return spans;
}

std::vector<std::string> encode_spans(const std::vector<EntitySpan>& spans, std::size_t length) {
  std::vector<const EntitySpan*> order;
  order.reserve(spans.size());
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > length) {
      throw Error(ErrorKind::InvalidSpan, "span [" + std::to_string(s.start) + "," +
                                              std::to_string(s.end) + ") outside sentence of length " +
                                              std::to_string(length));
    }
    order.push_back(&s);
  }
  std::sort(order.begin(), order.end(),
            [](const EntitySpan* a, const EntitySpan* b) { return a->start < b->start; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i - 1]->overlaps(*order[i])) {
      throw Error(ErrorKind::OverlappingSpans,
                  "spans at " + std::to_string(order[i - 1]->start) + " and " +
                      std::to_string(order[i]->start) + " intersect");
    }
  }
  std::vector<std::string> tags(length, "O");
  for (const auto* s : order) {
    tags[s->start] = begin_tag(s->type);
    for (std::size_t i = s->start + 1; i < s->end; ++i) tags[i] = inside_tag(s->type);
  }
  return tags;
}

LabeledSentence suppress_type(const LabeledSentence& sentence, std::string_view type) {
  LabeledSentence out = sentence;
  for (auto& raw : out.tags) {
    auto t = parse_tag(raw);
    if (t && t->prefix != TagPrefix::Outside && t->type == type) raw = "O";
  }
  return out;
}

}  // namespace xnf
