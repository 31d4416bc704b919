#pragma once

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "qtrig/errors.hpp"
#include "qtrig/field.hpp"

namespace qtrig {

// Snapshot container format "QF1":
//   8-byte magic "QTRGFLD1", uint64 little-endian point count N,
//   then N little-endian IEEE-754 doubles.
// Plain text (one decimal value per line) is accepted as an alternative.
inline constexpr std::array<char, 8> kQf1Magic = {'Q', 'T', 'R', 'G',
                                                  'F', 'L', 'D', '1'};

namespace detail {

inline void store_le64(std::uint64_t v, unsigned char* out) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
}

inline std::uint64_t load_le64(const unsigned char* in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return v;
}

inline std::uint64_t double_bits(double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  return bits;
}

inline double bits_double(std::uint64_t bits) {
  double d;
  std::memcpy(&d, &bits, sizeof(d));
  return d;
}

inline void require_finite(std::span<const double> values,
                           const std::filesystem::path& path) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw format_error(path.string() + ": non-finite value at entry " +
                         std::to_string(i));
  }
}

}  // namespace detail

inline void write_qf1(const std::filesystem::path& path,
                      std::span<const double> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw format_error(path.string() + ": cannot open for writing");
  out.write(kQf1Magic.data(), kQf1Magic.size());
  unsigned char buf[8];
  detail::store_le64(values.size(), buf);
  out.write(reinterpret_cast<const char*>(buf), 8);
  for (double v : values) {
    detail::store_le64(detail::double_bits(v), buf);
    out.write(reinterpret_cast<const char*>(buf), 8);
  }
  if (!out) throw format_error(path.string() + ": write failed");
}

inline std::vector<double> read_qf1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error(path.string() + ": cannot open");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kQf1Magic)
    throw format_error(path.string() + ": bad magic, not a QF1 snapshot");
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw format_error(path.string() + ": truncated header");
  const std::uint64_t n = detail::load_le64(buf);
  if (n == 0) throw format_error(path.string() + ": empty snapshot");
  std::vector<double> values;
  // Reserve against the actual payload, not the header's claim, so a
  // corrupt count fails as a truncation error instead of a bad_alloc.
  values.reserve(std::min<std::uint64_t>(n, 1u << 20));
  for (std::uint64_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in)
      throw format_error(path.string() + ": truncated at entry " +
                         std::to_string(i));
    values.push_back(detail::bits_double(detail::load_le64(buf)));
  }
  detail::require_finite(values, path);
  return values;
}

inline void write_txt(const std::filesystem::path& path,
                      std::span<const double> values) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw format_error(path.string() + ": cannot open for writing");
  char line[64];
  for (double v : values) {
    std::snprintf(line, sizeof(line), "%.17g\n", v);
    out << line;
  }
  if (!out) throw format_error(path.string() + ": write failed");
}

inline std::vector<double> read_txt(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw format_error(path.string() + ": cannot open");
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(line.c_str(), &end);
    while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
    if (end == line.c_str() || (end && *end != '\0') || errno == ERANGE)
      throw format_error(path.string() + ": line " + std::to_string(lineno) +
                         " is not a decimal value");
    values.push_back(v);
  }
  if (values.empty()) throw format_error(path.string() + ": empty snapshot");
  detail::require_finite(values, path);
  return values;
}

/// Reads a snapshot file by extension (.qf1 binary, .txt plain text).
inline FieldSnapshot read_snapshot(const std::filesystem::path& path,
                                   std::int64_t step) {
  const auto ext = path.extension().string();
  if (ext == ".qf1") return FieldSnapshot::eager(step, read_qf1(path));
  if (ext == ".txt") return FieldSnapshot::eager(step, read_txt(path));
  throw format_error(path.string() + ": unknown snapshot extension '" + ext +
                     "'");
}

/// One snapshot of a time-series directory; loading is deferred until load().
struct SeriesEntry {
  std::int64_t step = 0;
  std::filesystem::path file;

  FieldSnapshot load() const { return read_snapshot(file, step); }
};

namespace detail {

inline std::optional<std::int64_t> parse_step_filename(
    const std::string& name) {
  // step_NNNNNN.qf1 or step_NNNNNN.txt (6-digit step index)
  if (name.size() != 15 || name.rfind("step_", 0) != 0) return std::nullopt;
  const std::string ext = name.substr(11);
  if (ext != ".qf1" && ext != ".txt") return std::nullopt;
  std::int64_t step = 0;
  const auto* first = name.data() + 5;
  const auto [ptr, ec] = std::from_chars(first, first + 6, step);
  if (ec != std::errc{} || ptr != first + 6) return std::nullopt;
  return step;
}

}  // namespace detail

inline std::string step_filename(std::int64_t step,
                                 const std::string& ext = ".qf1") {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%06lld%s",
                static_cast<long long>(step), ext.c_str());
  return buf;
}

/// Lists the snapshots of a series directory, ordered by step. If a
/// manifest.json with a "steps" array is present it dictates the order;
/// otherwise files named step_NNNNNN.qf1/.txt are collected and sorted.
inline std::vector<SeriesEntry> ingest_series(
    const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw format_error(dir.string() + ": not a directory");

  auto resolve = [&dir](std::int64_t step) -> std::filesystem::path {
    for (const char* ext : {".qf1", ".txt"}) {
      auto p = dir / step_filename(step, ext);
      if (std::filesystem::exists(p)) return p;
    }
    throw format_error((dir / step_filename(step)).string() +
                       ": listed in manifest but missing");
  };

  std::vector<SeriesEntry> entries;
  const auto manifest_path = dir / "manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw format_error(manifest_path.string() + ": " + e.what());
    }
    if (!doc.contains("steps") || !doc["steps"].is_array())
      throw format_error(manifest_path.string() +
                         ": expected a \"steps\" array");
    for (const auto& s : doc["steps"]) {
      const auto step = s.get<std::int64_t>();
      entries.push_back(SeriesEntry{step, resolve(step)});
    }
    return entries;
  }

  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    if (auto step = detail::parse_step_filename(e.path().filename().string()))
      entries.push_back(SeriesEntry{*step, e.path()});
  }
  std::sort(entries.begin(), entries.end(),
            [](const SeriesEntry& a, const SeriesEntry& b) {
              return a.step < b.step;
            });
  return entries;
}

/// Writes content to path atomically: temp file in the same directory, then
/// rename. Readers never observe a half-written file.
inline void atomic_write_file(const std::filesystem::path& path,
                              const std::string& content) {
  const auto tmp = path.parent_path() /
                   (path.filename().string() + ".tmp" +
                    std::to_string(static_cast<unsigned long>(::getpid())));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw format_error(tmp.string() + ": cannot open for writing");
    out << content;
    if (!out) throw format_error(tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace qtrig
