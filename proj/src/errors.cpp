#include "fakeidet/errors.hpp"

namespace fakeidet {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::config: return "config";
    case ErrorKind::annotation: return "annotation";
    case ErrorKind::policy: return "policy";
    case ErrorKind::format: return "format";
    case ErrorKind::degenerate_data: return "degenerate_data";
    case ErrorKind::integrity: return "integrity";
    case ErrorKind::training: return "training";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, std::string module, const std::string& message)
    : std::runtime_error(module + ": " + message),
      kind_(kind),
      module_(std::move(module)),
      detail_(message) {}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return 2;
    case ErrorKind::io: return 4;
    default: return 3;
  }
}

}  // namespace fakeidet
