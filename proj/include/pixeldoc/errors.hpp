#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pixeldoc {

enum class ErrorKind {
  UsageError,
  ConfigInvalid,
  Io,
  Format,
  EmptyCorpus,
  FontResolution,
  ShapeMismatch,
  MissingTruth,
  NoTruth,
  NoInk,
  AllMasked,
  HeadMissing,
  NonFiniteLoss,
  LengthMismatch,
  OneClassOnly,
  EmptyIndex,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so
/// callers (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace pixeldoc
