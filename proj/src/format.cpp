#include "opinsum/format.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "opinsum/errors.hpp"

namespace opinsum {

std::string format_real(double value) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::string format_hex(std::uint64_t value) {
  char buf[20];
  const int n = std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return std::string(buf, static_cast<std::size_t>(n));
}

double parse_real(std::string_view text, const std::string& source, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v))
    throw ParseError(source, line, "malformed real '" + std::string(text) + "'");
  return v;
}

std::size_t parse_size(std::string_view text, const std::string& source, std::size_t line) {
  std::size_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ParseError(source, line, "malformed count '" + std::string(text) + "'");
  return v;
}

long long parse_int(std::string_view text, const std::string& source, std::size_t line) {
  long long v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ParseError(source, line, "malformed integer '" + std::string(text) + "'");
  return v;
}

std::uint64_t parse_hex(std::string_view text, const std::string& source, std::size_t line) {
  std::uint64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v, 16);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ParseError(source, line, "malformed hex value '" + std::string(text) + "'");
  return v;
}

bool LineReader::try_next(std::string& line) {
  while (std::getline(in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return true;
  }
  return false;
}

std::string LineReader::next() {
  std::string line;
  if (!try_next(line)) throw ParseError(source_, line_, "unexpected end of input");
  return line;
}

void LineReader::expect_line(std::string_view expected) {
  const std::string line = next();
  if (line != expected)
    throw ParseError(source_, line_, "expected '" + std::string(expected) + "', got '" + line + "'");
}

std::string LineReader::keyed(std::string_view key) {
  const std::string line = next();
  if (line.size() <= key.size() || line.compare(0, key.size(), key) != 0 || line[key.size()] != ' ')
    throw ParseError(source_, line_, "expected '" + std::string(key) + " <value>'");
  return line.substr(key.size() + 1);
}

}  // namespace opinsum
