#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "egobridge/geometry.hpp"

namespace egobridge::io {

using Json = nlohmann::json;

// Field access that reports the full path of whatever is missing or
// mistyped, e.g. "frames[12].left.pca".
const Json& require(const Json& obj, std::string_view key, const std::string& path);
double require_number(const Json& obj, std::string_view key, const std::string& path);
std::string require_string(const Json& obj, std::string_view key, const std::string& path);
std::vector<double> require_numbers(const Json& obj, std::string_view key,
                                    const std::string& path, std::size_t expected_size);
std::vector<double> as_numbers(const Json& value, const std::string& path,
                               std::size_t expected_size);
Vec3 as_vec3(const Json& value, const std::string& path);

void check_schema(const Json& obj, std::string_view expected, const std::string& path);

// {"t":[x,y,z],"r6":[6 floats]}
Json pose_to_json(const Pose& p);
Pose pose_from_json(const Json& value, const std::string& path);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& value);

// One JSON value per non-empty line.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records);

}  // namespace egobridge::io
