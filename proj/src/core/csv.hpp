#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace cdt {

// Doubles are printed with enough digits to round-trip exactly.
std::string format_double(double v);

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  void header(const std::vector<std::string>& names);
  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream os_;
  std::string path_;
};

class CsvReader {
 public:
  explicit CsvReader(const std::string& path);
  bool has_more();
  std::vector<std::string> next_row();

 private:
  std::ifstream is_;
  std::string path_;
  std::string pending_;
  bool has_pending_ = false;
};

}  // namespace cdt
