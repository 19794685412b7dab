#pragma once

// Text serialization helpers shared by the model, salience and report
// writers. Reals are written with 17 significant digits so that reading them
// back is value-exact.

#include <cstdint>
#include <istream>
#include <string>
#include <string_view>

namespace opinsum {

std::string format_real(double value);
std::string format_hex(std::uint64_t value);

double parse_real(std::string_view text, const std::string& source, std::size_t line);
std::size_t parse_size(std::string_view text, const std::string& source, std::size_t line);
long long parse_int(std::string_view text, const std::string& source, std::size_t line);
std::uint64_t parse_hex(std::string_view text, const std::string& source, std::size_t line);

/// Line-oriented reader that tracks line numbers for ParseError.
class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  /// Next line; throws ParseError at end of input.
  std::string next();
  bool try_next(std::string& line);
  void expect_line(std::string_view expected);
  /// Reads "key value" and returns value.
  std::string keyed(std::string_view key);

  std::size_t line() const { return line_; }
  const std::string& source() const { return source_; }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_ = 0;
};

}  // namespace opinsum
