#pragma once

// Locale-independent CSV reading and writing for the command-line tool.
// Format: comma separated, mandatory header row, '.' decimal point.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <maxdep/matrix.hpp>

namespace maxdep::cli {

/// Input or output that is unreadable, malformed or inconsistent.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  RowMatrix values;
};

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& text, const std::string& where) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw DataError(where + ": cannot parse '" + text + "' as a finite number");
  }
  return value;
}

inline std::string format_double(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buffer, ptr);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline CsvTable parse_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  CsvTable table;
  std::size_t line_number = 0;
  std::vector<double> data;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (table.header.empty()) {
      table.header = fields;
      if (table.header.empty()) throw DataError(source + ": empty header");
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw DataError(source + ":" + std::to_string(line_number) + ": expected " +
                      std::to_string(table.header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    for (const auto& f : fields) data.push_back(parse_double(f, source + ":" + std::to_string(line_number)));
    ++rows;
  }
  if (table.header.empty()) throw DataError(source + ": no header row");
  table.values = RowMatrix(rows, table.header.size(), std::move(data));
  return table;
}

inline CsvTable read_csv(const std::string& path) { return parse_csv(read_file(path), path); }

inline std::string to_csv(const std::vector<std::string>& header, const RowMatrix& values) {
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) out += ',';
    out += header[c];
  }
  out += '\n';
  for (std::size_t i = 0; i < values.rows(); ++i) {
    for (std::size_t c = 0; c < values.cols(); ++c) {
      if (c) out += ',';
      out += format_double(values(i, c));
    }
    out += '\n';
  }
  return out;
}

/// Writes via a temporary file and rename so readers never see partial output.
inline void write_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw DataError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw DataError("cannot move output into place at '" + path + "': " + ec.message());
}

}  // namespace maxdep::cli
