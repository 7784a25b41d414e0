#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace cir {

using Json = nlohmann::json;
namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path);
void write_text_file(const fs::path& path, const std::string& text);

Json read_json_file(const fs::path& path);
void write_json_file(const fs::path& path, const Json& j);

// One JSON object per non-blank line.
std::vector<Json> read_jsonl_file(const fs::path& path);
void write_jsonl_file(const fs::path& path, const std::vector<Json>& rows);

// Raw little-endian float32 payloads.
void write_f32le(const fs::path& path, std::span<const float> values);
std::vector<float> read_f32le(const fs::path& path);

std::string hex64(std::uint64_t h);

// Stable hash of a JSON document (its compact dump).
std::string config_hash(const Json& config);

}  // namespace cir
