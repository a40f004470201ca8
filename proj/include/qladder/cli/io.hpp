#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

namespace qladder::cli {

class FilesystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Locale-independent rendering with 17 significant digits.
inline std::string format_real(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw FilesystemError("cannot create output directory '" + dir.string() + "'");
}

inline void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw FilesystemError("cannot open '" + file.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw FilesystemError("write failed for '" + file.string() + "'");
}

inline void write_json(const std::filesystem::path& file, const nlohmann::json& j) {
  write_text(file, j.dump(2) + "\n");
}

/// Comma-separated rows with LF endings, assembled in memory and written once.
class Csv {
 public:
  explicit Csv(std::initializer_list<std::string> header) {
    std::vector<std::string> h(header);
    row(h);
  }
  explicit Csv(const std::vector<std::string>& header) { row(header); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }

  const std::string& text() const { return text_; }
  void save(const std::filesystem::path& file) const { write_text(file, text_); }

 private:
  std::string text_;
};

inline std::string cell(double x) { return format_real(x); }
inline std::string cell(int x) { return std::to_string(x); }
inline std::string cell(std::size_t x) { return std::to_string(x); }
inline std::string cell(bool x) { return x ? "1" : "0"; }
inline std::string cell(const char* s) { return s; }
inline std::string cell(const std::string& s) { return s; }

template <class... T>
std::vector<std::string> cells(const T&... xs) {
  return {cell(xs)...};
}

}  // namespace qladder::cli
