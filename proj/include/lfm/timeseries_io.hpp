#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lfm/infer.hpp"

namespace lfm::io {

// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

// Header row plus rows of optional cells; empty cells are written as nothing.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::optional<double>>> rows;

  void add_row(std::vector<std::optional<double>> row);
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

// Columns t, y_1..y_d, c_1..c_m. A row with every y empty is a missing
// observation; partially missing rows are rejected.
void write_timeseries_csv(const std::filesystem::path& path, const infer::TimeSeriesData& data);
infer::TimeSeriesData read_timeseries_csv(const std::filesystem::path& path);

}  // namespace lfm::io
