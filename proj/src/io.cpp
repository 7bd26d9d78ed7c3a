#include "aigt/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <system_error>

namespace aigt {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kContract: return "contract_violation";
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kStage: return "stage_violation";
    case ErrorKind::kMalformed: return "malformed";
    case ErrorKind::kIo: return "io_error";
    case ErrorKind::kVersion: return "version_mismatch";
    case ErrorKind::kCorrupt: return "corrupt";
  }
  return "unknown";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path, "path");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::kIo, "read failed for " + path, "path");
  return buf.str();
}

void write_file_atomic(const std::string& path, std::string_view contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  std::random_device rd;
  const fs::path tmp = target.parent_path() /
                       (target.filename().string() + ".tmp" + std::to_string(rd()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp.string(), "path");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw Error(ErrorKind::kIo, "write failed for " + tmp.string(), "path");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw Error(ErrorKind::kIo, "cannot rename onto " + path + ": " + ec.message(), "path");
  }
}

nlohmann::json parse_json(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kCorrupt, origin + ": invalid JSON at byte " + std::to_string(e.byte),
                "$");
  }
}

namespace json_field {

const nlohmann::json& require(const nlohmann::json& j, const char* key, const std::string& path) {
  const std::string field = join(path, key);
  if (!j.is_object()) throw Error(ErrorKind::kCorrupt, path + " is not an object", path);
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorKind::kCorrupt, "missing field " + field, field);
  return *it;
}

namespace {
[[noreturn]] void wrong_type(const std::string& path, const char* key, const char* expected) {
  const std::string field = join(path, key);
  throw Error(ErrorKind::kCorrupt, "field " + field + " must be " + expected, field);
}
}  // namespace

std::string string(const nlohmann::json& j, const char* key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_string()) wrong_type(path, key, "a string");
  return v.get<std::string>();
}

double number(const nlohmann::json& j, const char* key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_number()) wrong_type(path, key, "a number");
  return v.get<double>();
}

long long integer(const nlohmann::json& j, const char* key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_number_integer()) wrong_type(path, key, "an integer");
  return v.get<long long>();
}

unsigned long long unsigned_integer(const nlohmann::json& j, const char* key,
                                    const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_number_unsigned()) wrong_type(path, key, "a non-negative integer");
  return v.get<unsigned long long>();
}

bool boolean(const nlohmann::json& j, const char* key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_boolean()) wrong_type(path, key, "a boolean");
  return v.get<bool>();
}

const nlohmann::json& array(const nlohmann::json& j, const char* key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_array()) wrong_type(path, key, "an array");
  return v;
}

const nlohmann::json& object(const nlohmann::json& j, const char* key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_object()) wrong_type(path, key, "an object");
  return v;
}

}  // namespace json_field

std::string csv_quote(std::string_view field) {
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string row;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) row.push_back(',');
    row += csv_quote(fields[i]);
  }
  row += "\r\n";
  return row;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool row_has_content = false;
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        row_has_content = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !field.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        field.clear();
        row.clear();
        row_has_content = false;
        break;
      default:
        field.push_back(c);
        row_has_content = true;
    }
  }
  if (row_has_content || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace aigt
