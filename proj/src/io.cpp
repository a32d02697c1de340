#include "crossdiff/io.hpp"

#include <cstdio>
#include <stdexcept>

namespace crossdiff {

std::string format_float(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvFile::CsvFile(const std::string& path, const std::string& header) : out_(path) {
  if (!out_) throw std::runtime_error("cannot open " + path);
  out_ << header << '\n';
}

void CsvFile::row(const std::vector<std::string>& fields) {
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << fields[i];
  }
  out_ << '\n';
}

void Manifest::set(const std::string& key, const std::string& value) {
  entries_.emplace_back(key, value);
}
void Manifest::set(const std::string& key, const char* value) {
  entries_.emplace_back(key, std::string(value));
}
void Manifest::set(const std::string& key, double value) { set(key, format_float(value)); }
void Manifest::set(const std::string& key, int value) { set(key, std::to_string(value)); }
void Manifest::set(const std::string& key, bool value) {
  set(key, std::string(value ? "true" : "false"));
}

void Manifest::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
}

}  // namespace crossdiff
