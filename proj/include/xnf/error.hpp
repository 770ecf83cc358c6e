#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace xnf {

enum class ErrorKind {
  MalformedLine,
  UnknownTag,
  EmptyInput,
  LineCountMismatch,
  EmptyLine,
  AllCorporaEmpty,
  InvalidSpec,
  InvalidSpan,
  OverlappingSpans,
  IndexOutOfRange,
  AllMasked,
  EmptyCorpus,
  NonFiniteLoss,
  Transport,
  ProtocolError,
  InsufficientEntities,
  ShapeMismatch,
  SizeExceedsData,
  Config,
  Io,
  Format,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers and tests can
// branch on it without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Message without the kind prefix, for rethrowing with added context.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

// Raised by parsers; line is 1-based.
class ParseError : public Error {
 public:
  ParseError(ErrorKind kind, std::size_t line, const std::string& what)
      : Error(kind, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedLine: return "MalformedLine";
    case ErrorKind::UnknownTag: return "UnknownTag";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::LineCountMismatch: return "LineCountMismatch";
    case ErrorKind::EmptyLine: return "EmptyLine";
    case ErrorKind::AllCorporaEmpty: return "AllCorporaEmpty";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidSpan: return "InvalidSpan";
    case ErrorKind::OverlappingSpans: return "OverlappingSpans";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::AllMasked: return "AllMasked";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::Transport: return "Transport";
    case ErrorKind::ProtocolError: return "ProtocolError";
    case ErrorKind::InsufficientEntities: return "InsufficientEntities";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::SizeExceedsData: return "SizeExceedsData";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Format: return "Format";
  }
  return "Unknown";
}

}  // namespace xnf
