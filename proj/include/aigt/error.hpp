#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aigt {

// Classifies every failure the library reports. The HTTP layer and the CLI
// map these onto status codes and exit codes.
enum class ErrorKind {
  kContract,   // precondition or invariant violated by the caller
  kNotFound,   // an id or reference does not resolve
  kStage,      // workflow stage rule violated
  kMalformed,  // payload or input text cannot be parsed
  kIo,         // filesystem failure
  kVersion,    // unsupported schema version
  kCorrupt,    // persisted document fails validation
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string field = {})
      : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}

  ErrorKind kind() const { return kind_; }
  // Name of the offending field or argument, empty when not applicable.
  const std::string& field() const { return field_; }

 private:
  ErrorKind kind_;
  std::string field_;
};

inline Error contract_error(const std::string& message, std::string field = {}) {
  return Error(ErrorKind::kContract, message, std::move(field));
}
inline Error not_found_error(const std::string& message, std::string field = {}) {
  return Error(ErrorKind::kNotFound, message, std::move(field));
}
inline Error stage_error(const std::string& message, std::string field = {}) {
  return Error(ErrorKind::kStage, message, std::move(field));
}

}  // namespace aigt
