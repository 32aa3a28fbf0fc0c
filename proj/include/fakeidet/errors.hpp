#pragma once

#include <stdexcept>
#include <string>

namespace fakeidet {

enum class ErrorKind {
  usage,
  config,
  annotation,
  policy,
  format,
  degenerate_data,
  integrity,
  training,
  io,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the toolkit carries the module that raised it and a
// category that the CLI maps to an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string module_;
  std::string detail_;
};

// Exit codes: 0 success, 2 usage, 3 data/contract, 4 I/O.
int exit_code_for(ErrorKind kind);

}  // namespace fakeidet
