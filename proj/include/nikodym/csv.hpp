#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace nikodym {

// Shortest round-trip decimal form; independent of the global locale.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Comma-separated writer with a fixed header.
class CsvWriter {
public:
  CsvWriter(std::ostream& out, std::vector<std::string> header) : out_(out), columns_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... cells) {
    static_assert(sizeof...(Ts) > 0);
    std::size_t i = 0;
    ((out_ << (i++ ? "," : "") << cell(cells)), ...);
    out_ << '\n';
    ++rows_;
  }

  std::size_t rows() const { return rows_; }
  std::size_t columns() const { return columns_; }

private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(float v) { return format_double(v); }
  static std::string cell(const std::string& s) { return quote(s); }
  static std::string cell(const char* s) { return quote(s); }
  static std::string cell(std::string_view s) { return quote(std::string(s)); }
  static std::string cell(bool b) { return b ? "1" : "0"; }
  template <class I, std::enable_if_t<std::is_integral_v<I>, int> = 0>
  static std::string cell(I v) {
    return std::to_string(v);
  }

  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }

  std::ostream& out_;
  std::size_t columns_;
  std::size_t rows_ = 0;
};

}  // namespace nikodym
