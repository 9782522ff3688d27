#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dkstn {

enum class ErrorKind {
  dimension,
  format,
  length,
  coverage,
  parameter,
  alignment,
  channel,
  batch,
  training,
  numeric,
  undefined_metric,
  undefined_phase,
  degeneracy,
  configuration,
  data,
  parse,
  io,
  usage,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so the CLI can emit a
/// single machine-parsable line: `dkstn: error[<kind>]: <message>`.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace dkstn
