#include "cir/util.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cir/error.hpp"
#include "cir/rng.hpp"

namespace cir {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kDegenerate: return "degenerate input";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kConfig: return "configuration error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kLookup: return "lookup error";
    case ErrorKind::kContract: return "contract error";
  }
  return "error";
}

double standard_normal(Rng& rng) {
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  double u1;
  do {
    u1 = static_cast<double>(rng() >> 11) * kScale;
  } while (u1 <= 0.0);
  const double u2 = static_cast<double>(rng() >> 11) * kScale;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kData, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kData, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::kData, "short write to " + path.string());
}

Json read_json_file(const fs::path& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

std::vector<Json> read_jsonl_file(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<Json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      fail(ErrorKind::kFormat,
           path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

void write_jsonl_file(const fs::path& path, const std::vector<Json>& rows) {
  std::string text;
  for (const auto& r : rows) text += r.dump() + "\n";
  write_text_file(path, text);
}

void write_f32le(const fs::path& path, std::span<const float> values) {
  std::string bytes(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) {
      bytes[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    }
  }
  write_text_file(path, bytes);
}

std::vector<float> read_f32le(const fs::path& path) {
  const std::string bytes = read_text_file(path);
  if (bytes.size() % 4 != 0) {
    fail(ErrorKind::kFormat, path.string() + ": length is not a multiple of 4");
  }
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(
                  static_cast<unsigned char>(bytes[i * 4 + b]))
              << (8 * b);
    }
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

std::string hex64(std::uint64_t h) {
  static const char* kDigits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = kDigits[h & 0xf];
    h >>= 4;
  }
  return s;
}

std::string config_hash(const Json& config) { return hex64(fnv1a(config.dump())); }

}  // namespace cir
