#pragma once

#include <stdexcept>
#include <string>

namespace macroreal {

enum class ErrorKind {
  InvalidArgument,  // parameter outside its domain
  Config,           // malformed or schema-violating configuration
  Io,               // missing, unreadable or unwritable file
  Undefined,        // probability or statistic with zero denominator
  Degenerate,       // hidden-variable configuration with an empty run
  NoPeak,           // coincidence histogram without a detectable peak
  NonConvergence,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool ok, const std::string& message) {
  if (!ok) fail(ErrorKind::InvalidArgument, message);
}

}  // namespace macroreal
