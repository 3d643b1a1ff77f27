#include "egobridge/json_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "egobridge/errors.hpp"

namespace egobridge::io {

namespace {

std::string join(const std::string& path, std::string_view key) {
  if (path.empty()) return std::string(key);
  return path + "." + std::string(key);
}

}  // namespace

const Json& require(const Json& obj, std::string_view key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    throw SchemaError(join(path, key) + ": missing field");
  }
  return *it;
}

double require_number(const Json& obj, std::string_view key, const std::string& path) {
  const Json& v = require(obj, key, path);
  if (!v.is_number()) throw SchemaError(join(path, key) + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(join(path, key) + ": not finite");
  return d;
}

std::string require_string(const Json& obj, std::string_view key, const std::string& path) {
  const Json& v = require(obj, key, path);
  if (!v.is_string()) throw SchemaError(join(path, key) + ": expected a string");
  return v.get<std::string>();
}

std::vector<double> as_numbers(const Json& value, const std::string& path,
                               std::size_t expected_size) {
  if (!value.is_array()) throw SchemaError(path + ": expected an array");
  if (expected_size != 0 && value.size() != expected_size) {
    throw SchemaError(path + ": expected " + std::to_string(expected_size) +
                      " values, got " + std::to_string(value.size()));
  }
  std::vector<double> out;
  out.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!value[i].is_number()) {
      throw SchemaError(path + "[" + std::to_string(i) + "]: expected a number");
    }
    out.push_back(value[i].get<double>());
  }
  return out;
}

std::vector<double> require_numbers(const Json& obj, std::string_view key,
                                    const std::string& path, std::size_t expected_size) {
  return as_numbers(require(obj, key, path), join(path, key), expected_size);
}

Vec3 as_vec3(const Json& value, const std::string& path) {
  const auto v = as_numbers(value, path, 3);
  return {v[0], v[1], v[2]};
}

void check_schema(const Json& obj, std::string_view expected, const std::string& path) {
  const std::string got = require_string(obj, "schema", path);
  if (got != expected) {
    throw SchemaError(join(path, "schema") + ": expected \"" + std::string(expected) +
                      "\", got \"" + got + "\"");
  }
}

Json pose_to_json(const Pose& p) {
  const Rot6D v = rot6d_from_matrix(p.r);
  return Json{{"t", {p.t.x(), p.t.y(), p.t.z()}},
              {"r6", {v[0], v[1], v[2], v[3], v[4], v[5]}}};
}

Pose pose_from_json(const Json& value, const std::string& path) {
  Pose p;
  p.t = as_vec3(require(value, "t", path), join(path, "t"));
  const auto r6 = require_numbers(value, "r6", path, 6);
  Rot6D v;
  for (int i = 0; i < 6; ++i) v[i] = r6[static_cast<std::size_t>(i)];
  try {
    p.r = matrix_from_rot6d(v);
  } catch (const DegenerateInput&) {
    throw SchemaError(join(path, "r6") + ": not a decodable rotation");
  }
  return p;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path.string() + ": cannot open");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& value) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot write");
  out << value.dump(2) << '\n';
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path.string() + ": cannot open");
  std::vector<Json> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot write");
  for (const auto& r : records) out << r.dump() << '\n';
}

}  // namespace egobridge::io
