#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

namespace nbeats {

using Json = nlohmann::ordered_json;

// Like Json::dump, but floating-point numbers always carry 17 significant digits.
std::string dump_json(const Json& value, int indent = 2);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

// "%.17g"
std::string format_number(double value);

}  // namespace nbeats
