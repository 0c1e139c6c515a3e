#pragma once

#include <stdexcept>
#include <string>

namespace traylab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the scene-program parser. `line` is 1-based within the program
// text that was parsed (after fence extraction), 0 when not attributable.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

// Mismatched shapes, duplicate ids, misuse of a stateful API.
class StructuralError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& message)
      : Error(path + ": " + message), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class ReplayMissError : public Error {
 public:
  explicit ReplayMissError(const std::string& hash)
      : Error("replay transcript has no response for request " + hash), hash_(hash) {}
  const std::string& hash() const noexcept { return hash_; }

 private:
  std::string hash_;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& message, int status) : Error(message), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

// A single optimizer step could not produce a usable proposal; the loop skips it.
class OptimizerStepError : public Error {
 public:
  using Error::Error;
};

}  // namespace traylab
