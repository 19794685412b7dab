#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opinsum {

/// Load failure in a corpus, embedding, lexicon or model file.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// An object was used before it was initialized, or after it went stale.
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace opinsum
