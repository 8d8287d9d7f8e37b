#pragma once

#include <stdexcept>
#include <string>

namespace recurnas {

enum class ErrorKind {
  Config,         // bad parameter combination or value
  Parse,          // malformed input text
  NotFound,       // unknown architecture / missing entry
  Frontier,       // epoch beyond what is stored for an entry
  MustTrainFirst, // environment metric requested before it was paid for
  Contract,       // precondition violated by the caller
  Generation,     // retry cap exhausted while generating
  Shape,          // tensor shape mismatch
  Numeric,        // non-finite value where finite required
  Io,             // filesystem failure
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::NotFound: return "not_found";
    case ErrorKind::Frontier: return "frontier";
    case ErrorKind::MustTrainFirst: return "must_train_first";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Generation: return "generation";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace recurnas
