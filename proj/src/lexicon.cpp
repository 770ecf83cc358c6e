#include "xnf/lexicon.hpp"

#include "xnf/error.hpp"
#include "xnf/text.hpp"

namespace xnf {

void Lexicon::add(std::string source, std::string target) {
  if (source.empty() || target.empty()) throw Error(ErrorKind::InvalidSpec, "empty lexicon phrase");
  auto& targets = index_[text::casefold_utf8(source)];
  auto [it, inserted] = targets.emplace(text::casefold_utf8(target), entries_.size());
  if (inserted) entries_.emplace_back(std::move(source), std::move(target));
}

std::vector<std::string> Lexicon::lookup(std::string_view source) const {
  std::vector<std::string> out;
  auto it = index_.find(text::casefold_utf8(source));
  if (it == index_.end()) return out;
  for (const auto& [folded, idx] : it->second) out.push_back(entries_[idx].second);
  return out;
}

bool Lexicon::contains(std::string_view source, std::string_view target) const {
  auto it = index_.find(text::casefold_utf8(source));
  if (it == index_.end()) return false;
  return it->second.count(text::casefold_utf8(target)) > 0;
}

std::string Lexicon::to_tsv() const {
  std::string out;
  for (const auto& [s, t] : entries_) {
    out += s;
    out += '\t';
    out += t;
    out += '\n';
  }
  return out;
}

Lexicon Lexicon::from_tsv(std::string_view text) {
  Lexicon lex;
  auto lines = text::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = lines[i];
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos) {
      throw ParseError(ErrorKind::MalformedLine, i + 1, "expected source<TAB>target");
    }
    auto src = line.substr(0, tab);
    auto tgt = line.substr(tab + 1);
    if (src.empty() || tgt.empty()) throw ParseError(ErrorKind::MalformedLine, i + 1, "empty phrase");
    lex.add(std::string(src), std::string(tgt));
  }
  return lex;
}

}  // namespace xnf
