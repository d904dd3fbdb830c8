#include "core/csv.hpp"

#include <cstdio>

#include "core/error.hpp"

namespace cdt {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path) : os_(path), path_(path) {
  if (!os_) fail(ErrorCode::io, "cannot open csv for writing: " + path);
}

void CsvWriter::header(const std::vector<std::string>& names) { row(names); }

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os_ << ',';
    os_ << cells[i];
  }
  os_ << '\n';
  if (!os_) fail(ErrorCode::io, "csv write failed: " + path_);
}

CsvReader::CsvReader(const std::string& path) : is_(path), path_(path) {
  if (!is_) fail(ErrorCode::io, "cannot open csv for reading: " + path);
}

bool CsvReader::has_more() {
  if (has_pending_) return true;
  while (std::getline(is_, pending_)) {
    if (!pending_.empty() && pending_.back() == '\r') pending_.pop_back();
    if (!pending_.empty()) {
      has_pending_ = true;
      return true;
    }
  }
  return false;
}

std::vector<std::string> CsvReader::next_row() {
  if (!has_more()) {
    fail(ErrorCode::truncated, "csv ended early: " + path_);
  }
  has_pending_ = false;
  std::vector<std::string> cells;
  std::string cell;
  for (const char ch : pending_) {
    if (ch == ',') {
      cells.push_back(cell);
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  cells.push_back(cell);
  return cells;
}

}  // namespace cdt
