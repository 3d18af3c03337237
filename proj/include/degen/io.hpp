#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace degen {

using Json = nlohmann::ordered_json;

/// Shortest decimal form that round-trips (%.17g).
std::string fmt(double v);

/// Writes content to path via a sibling temporary and rename, so readers
/// never observe a partially written file at the final path.
void atomic_write(const std::filesystem::path& path, const std::string& content);

void write_json(const std::filesystem::path& path, const Json& j);

/// Row-major matrix; rows[j] is one CSV line.
std::string csv_matrix(const std::vector<double>& values, int nx, int ny);

/// Header line plus rows of numbers.
std::string csv_table(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows);

}  // namespace degen
