#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace xnf {

// Ordered registry of entity type names (PER, ORG, ...). Order fixes the
// label ids of a tagger built over it.
class TypeSet {
 public:
  TypeSet() = default;
  explicit TypeSet(std::vector<std::string> names);

  static TypeSet conll() { return TypeSet({"PER", "ORG", "LOC", "MISC"}); }

  bool contains(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  TypeSet without(std::string_view name) const;

 private:
  std::vector<std::string> names_;
};

struct LabeledSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const LabeledSentence&) const = default;
};

struct ParallelPair {
  std::vector<std::string> source;
  std::vector<std::string> target;
  std::string domain;
  std::uint64_t id = 0;

  bool operator==(const ParallelPair&) const = default;
};

}  // namespace xnf
