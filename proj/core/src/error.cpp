#include "dkstn/error.hpp"

namespace dkstn {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::format: return "format";
    case ErrorKind::length: return "length";
    case ErrorKind::coverage: return "coverage";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::channel: return "channel";
    case ErrorKind::batch: return "batch";
    case ErrorKind::training: return "training";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::undefined_metric: return "undefined-metric";
    case ErrorKind::undefined_phase: return "undefined-phase";
    case ErrorKind::degeneracy: return "degeneracy";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::data: return "data";
    case ErrorKind::parse: return "parse";
    case ErrorKind::io: return "io";
    case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace dkstn
