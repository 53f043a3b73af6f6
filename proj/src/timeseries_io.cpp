#include "lfm/timeseries_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "lfm/errors.hpp"

namespace lfm::io {

using numlin::Vector;

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void CsvTable::add_row(std::vector<std::optional<double>> row) {
  if (row.size() != header.size()) throw ArgumentError("CsvTable: row width differs from header");
  rows.push_back(std::move(row));
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open " + path.string() + " for writing");
  for (size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      if (row[i]) out << format_double(*row[i]);
    }
    out << '\n';
  }
  if (!out) throw ArgumentError("write failed for " + path.string());
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError(path.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header = split(line);
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != table.header.size()) {
      std::ostringstream os;
      os << path.string() << ":" << lineno << ": expected " << table.header.size() << " cells, got "
         << cells.size();
      throw ArgumentError(os.str());
    }
    std::vector<std::optional<double>> row;
    for (const auto& c : cells) {
      if (c.empty()) {
        row.emplace_back();
        continue;
      }
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size()) {
        throw ArgumentError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
      }
      row.emplace_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_timeseries_csv(const std::filesystem::path& path, const infer::TimeSeriesData& data) {
  data.validate();
  Eigen::Index d = 0, m = 0;
  for (const auto& y : data.observations)
    if (y) d = y->size();
  if (!data.controls.empty()) m = data.controls.front().size();
  CsvTable t;
  t.header.push_back("t");
  for (Eigen::Index i = 0; i < d; ++i) t.header.push_back("y_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < m; ++i) t.header.push_back("c_" + std::to_string(i + 1));
  for (size_t k = 0; k < data.size(); ++k) {
    std::vector<std::optional<double>> row{data.times[k]};
    for (Eigen::Index i = 0; i < d; ++i) {
      row.push_back(data.observations[k] ? std::optional<double>((*data.observations[k])(i)) : std::nullopt);
    }
    for (Eigen::Index i = 0; i < m; ++i) row.push_back(data.controls[k](i));
    t.add_row(std::move(row));
  }
  write_csv(path, t);
}

infer::TimeSeriesData read_timeseries_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header.empty() || t.header[0] != "t") throw ArgumentError(path.string() + ": first column must be t");
  std::vector<size_t> ycols, ccols;
  for (size_t i = 1; i < t.header.size(); ++i) {
    if (t.header[i].rfind("y_", 0) == 0) {
      ycols.push_back(i);
    } else if (t.header[i].rfind("c_", 0) == 0) {
      ccols.push_back(i);
    } else {
      throw ArgumentError(path.string() + ": unknown column '" + t.header[i] + "'");
    }
  }
  infer::TimeSeriesData data;
  for (const auto& row : t.rows) {
    if (!row[0]) throw ArgumentError(path.string() + ": empty time cell");
    data.times.push_back(*row[0]);
    size_t present = 0;
    Vector y(Eigen::Index(ycols.size()));
    for (size_t i = 0; i < ycols.size(); ++i) {
      if (row[ycols[i]]) {
        y(Eigen::Index(i)) = *row[ycols[i]];
        ++present;
      }
    }
    if (present == ycols.size() && present > 0) {
      data.observations.emplace_back(std::move(y));
    } else if (present == 0) {
      data.observations.emplace_back();
    } else {
      throw ArgumentError(path.string() + ": partially missing observation rows are not supported");
    }
    if (!ccols.empty()) {
      Vector c(Eigen::Index(ccols.size()));
      for (size_t i = 0; i < ccols.size(); ++i) {
        if (!row[ccols[i]]) throw ArgumentError(path.string() + ": empty control cell");
        c(Eigen::Index(i)) = *row[ccols[i]];
      }
      data.controls.push_back(std::move(c));
    }
  }
  data.validate();
  return data;
}

}  // namespace lfm::io
