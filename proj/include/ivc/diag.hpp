#pragma once

#include <stdexcept>
#include <string>

namespace ivc {

struct SourcePos {
  int line = 0;
  int col = 0;
};

// Base for all user-facing errors. `code` is a stable machine-readable tag
// (e.g. "SyntaxError", "ArityMismatch") used by tests and the CLI.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& msg, SourcePos pos = {})
      : std::runtime_error(format(code, msg, pos)), code_(std::move(code)), pos_(pos) {}

  const std::string& code() const { return code_; }
  SourcePos pos() const { return pos_; }

 private:
  static std::string format(const std::string& code, const std::string& msg, SourcePos pos) {
    if (pos.line > 0)
      return code + " at " + std::to_string(pos.line) + ":" + std::to_string(pos.col) + ": " + msg;
    return code + ": " + msg;
  }

  std::string code_;
  SourcePos pos_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class CheckError : public Error {
 public:
  using Error::Error;
};

class VmError : public Error {
 public:
  using Error::Error;
};

}  // namespace ivc
