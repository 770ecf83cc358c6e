#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace xnf {

// Bilingual phrase table: source phrase -> set of target phrases. Keys and
// values are matched case-insensitively; original casing is kept for output.
class Lexicon {
 public:
  void add(std::string source, std::string target);

  // Target phrases for a source phrase, original casing; empty if absent.
  std::vector<std::string> lookup(std::string_view source) const;
  bool contains(std::string_view source, std::string_view target) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  // One "source<TAB>target" per line.
  std::string to_tsv() const;
  static Lexicon from_tsv(std::string_view text);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  // folded source -> (folded target -> index into entries_)
  std::map<std::string, std::map<std::string, std::size_t>, std::less<>> index_;
};

}  // namespace xnf
