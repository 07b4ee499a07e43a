#pragma once

#include <stdexcept>
#include <string>

namespace nfol {

// Error taxonomy. The CLI maps kinds to exit codes: Usage -> 2, anything
// data-shaped (files, vocab, indices, parsing, contracts) -> 3, numeric
// failures during training/evaluation -> 4.
enum class ErrorKind {
  Usage,
  Data,      // malformed input files, dataset inconsistencies
  Vocab,     // unknown concept / category, hash mismatch
  Index,     // out-of-range object or step reference
  Shape,     // tensor shape mismatch
  Contract,  // precondition violated by a caller
  Capacity,  // guarded blow-up (e.g. too many ground atoms)
  Formula,   // malformed or non-closed formula
  Parse,     // DSL / s-expression syntax errors
  Numeric,   // non-finite values where finite required
  Training,  // divergence, non-finite loss
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
  ErrorKind kind;
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Data: return "data";
    case ErrorKind::Vocab: return "vocab";
    case ErrorKind::Index: return "index";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Capacity: return "capacity";
    case ErrorKind::Formula: return "formula";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Training: return "training";
  }
  return "unknown";
}

}  // namespace nfol
