#pragma once

#include <stdexcept>
#include <string>

namespace cir {

// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kDimension,   // shape mismatch between operands
  kDegenerate,  // zero-norm or otherwise undefined input
  kNumeric,     // NaN/Inf produced or consumed
  kConfig,      // incoherent or missing configuration
  kData,        // malformed, missing or insufficient data
  kFormat,      // on-disk file disagrees with its manifest
  kLookup,      // unknown id or vocabulary entry
  kContract,    // caller violated a documented precondition
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace cir
