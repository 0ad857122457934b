#ifndef GEOPROBE_ERROR_H_
#define GEOPROBE_ERROR_H_

#include <stdexcept>
#include <string>

namespace geoprobe {

// Base for all toolkit errors. Callers that only need a message can catch
// this; the subclasses carry enough structure for tests to tell cases apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violations on user-supplied arguments or configuration.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed input text (CoNLL-U, CSV, TSV, JSON) with an optional line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace geoprobe

#endif  // GEOPROBE_ERROR_H_
