#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include "parloc/error.hpp"

namespace parloc {

/// Shortest decimal text that round-trips to the same double.
inline void append_number(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

inline void append_number(std::string& out, std::uint64_t v) {
  char buf[24];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

inline std::string format_number(double v) {
  std::string s;
  append_number(s, v);
  return s;
}

/// Whitespace tokenizer over one line; errors carry "file:line".
class LineTokens {
 public:
  LineTokens(std::string_view line, const std::string& where) : rest_(line), where_(where) {}

  bool at_end() {
    skip_space();
    return rest_.empty();
  }

  std::string_view word() {
    skip_space();
    if (rest_.empty()) error("unexpected end of line");
    std::size_t n = 0;
    while (n < rest_.size() && !is_space(rest_[n])) ++n;
    std::string_view w = rest_.substr(0, n);
    rest_.remove_prefix(n);
    return w;
  }

  double real() {
    const std::string_view w = word();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size()) {
      error("expected a number, got '" + std::string(w) + "'");
    }
    return v;
  }

  std::uint64_t integer() {
    const std::string_view w = word();
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size()) {
      error("expected a nonnegative integer, got '" + std::string(w) + "'");
    }
    return v;
  }

  void expect_end() {
    if (!at_end()) error("trailing tokens");
  }

  [[noreturn]] void error(const std::string& msg) const {
    fail(ErrorKind::kParse, where_ + ": " + msg);
  }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }
  void skip_space() {
    while (!rest_.empty() && is_space(rest_.front())) rest_.remove_prefix(1);
  }

  std::string_view rest_;
  std::string where_;
};

/// Iterates the non-blank, non-comment lines of a text file.
class DataLines {
 public:
  DataLines(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      const auto pos = line.find_first_not_of(" \t\r");
      if (pos == std::string::npos || line[pos] == '#') continue;
      return true;
    }
    return false;
  }

  std::string where() const { return name_ + ":" + std::to_string(line_no_); }

 private:
  std::istream& in_;
  std::string name_;
  std::size_t line_no_ = 0;
};

inline std::ifstream open_input(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path);
  return in;
}

inline void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  out << contents;
  if (!out) fail(ErrorKind::kIo, "failed writing " + path);
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in = open_input(path, true);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace parloc
