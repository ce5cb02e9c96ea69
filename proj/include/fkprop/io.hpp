#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace fkprop {

// Finite doubles as JSON numbers; infinities/NaN as strings ("inf", "-inf",
// "nan") since JSON has no literal for them.
nlohmann::json json_number(double v);

// Parses a value written by json_number.
double number_from_json(const nlohmann::json& j);

std::string read_file(const std::filesystem::path& path);

// Write via temp file + rename so readers never observe partial content.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content);

}  // namespace fkprop
