#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "oisac/error.hpp"

namespace oisac::csv {

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (res.ec != std::errc{}) throw Error("csv::format: to_chars failed");
  return {buf.data(), res.ptr};
}

inline std::string format(std::uint64_t v) { return std::to_string(v); }

/// Builds a CSV document row by row. Fields are written verbatim, so callers
/// must not pass commas or newlines.
class Table {
public:
  explicit Table(std::vector<std::string> header) : columns_(header.size()) { add_row(header); }

  void add_row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw Error("csv::Table: row width does not match the header");
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (fields[k].find_first_of(",\n\r") != std::string::npos) {
        throw Error("csv::Table: field contains a separator: " + fields[k]);
      }
      if (k > 0) text_ += ',';
      text_ += fields[k];
    }
    text_ += '\n';
  }

  [[nodiscard]] const std::string& str() const noexcept { return text_; }

private:
  std::size_t columns_;
  std::string text_;
};

/// Writes `content` to `path` through a sibling temporary file and a rename,
/// so readers never observe a half-written file.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ignore;
      std::filesystem::remove(tmp, ignore);
      throw ConfigError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignore;
    std::filesystem::remove(tmp, ignore);
    throw ConfigError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

/// Splits one CSV line on commas (no quoting).
inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace oisac::csv
