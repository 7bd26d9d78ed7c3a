#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aigt/error.hpp"

namespace aigt {

std::string read_file(const std::string& path);

// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view contents);

// Parses JSON, reporting a kCorrupt error naming `origin` on failure.
nlohmann::json parse_json(const std::string& text, const std::string& origin);

// Field accessors for validating JSON documents. On a missing or mistyped
// field they throw kCorrupt with the dotted path of the field.
namespace json_field {

const nlohmann::json& require(const nlohmann::json& j, const char* key, const std::string& path);
std::string string(const nlohmann::json& j, const char* key, const std::string& path);
double number(const nlohmann::json& j, const char* key, const std::string& path);
long long integer(const nlohmann::json& j, const char* key, const std::string& path);
unsigned long long unsigned_integer(const nlohmann::json& j, const char* key,
                                    const std::string& path);
bool boolean(const nlohmann::json& j, const char* key, const std::string& path);
const nlohmann::json& array(const nlohmann::json& j, const char* key, const std::string& path);
const nlohmann::json& object(const nlohmann::json& j, const char* key, const std::string& path);

inline std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}
inline std::string index(const std::string& path, size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

}  // namespace json_field

// Minimal RFC 4180 writer: every field quoted, embedded quotes doubled.
std::string csv_quote(std::string_view field);
std::string csv_row(const std::vector<std::string>& fields);

// Parses RFC 4180 text (quoted fields, "" escapes, CRLF or LF line ends).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace aigt
