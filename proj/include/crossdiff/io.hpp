#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace crossdiff {

// 17 significant digits, '.' decimal separator, locale independent.
std::string format_float(double v);

class CsvFile {
 public:
  CsvFile(const std::string& path, const std::string& header);
  void row(const std::vector<std::string>& fields);

 private:
  std::ofstream out_;
};

// Flat key=value run manifest.
class Manifest {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, const char* value);
  void set(const std::string& key, double value);
  void set(const std::string& key, int value);
  void set(const std::string& key, bool value);
  void write(const std::string& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace crossdiff
