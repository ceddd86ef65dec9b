#pragma once

// Minimal CSV reading helpers shared by the loaders. Internal to the library.

#include <charconv>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "expoerf/common.hpp"

namespace expoerf::csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline Error row_error(const std::string& source, std::size_t line, const std::string& what) {
  return Error(source + ":" + std::to_string(line) + ": " + what);
}

inline bool is_na(std::string_view s) { return s.empty() || s == "NA" || s == "nan" || s == "NaN"; }

inline double to_double(std::string_view s, const std::string& source, std::size_t line) {
  if (is_na(s)) return kMissing;
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw row_error(source, line, "not a number: '" + std::string(s) + "'");
  return v;
}

inline long to_long(std::string_view s, const std::string& source, std::size_t line) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw row_error(source, line, "not an integer: '" + std::string(s) + "'");
  return v;
}

/// Reads non-empty lines, skipping '#' comments. Line numbers are 1-based.
struct Line {
  std::size_t number;
  std::string text;
};

inline std::vector<Line> read_lines(std::istream& in) {
  std::vector<Line> lines;
  std::string s;
  std::size_t n = 0;
  while (std::getline(in, s)) {
    ++n;
    const auto t = trim(s);
    if (t.empty() || t.front() == '#') continue;
    lines.push_back({n, std::string(t)});
  }
  return lines;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

}  // namespace expoerf::csv
