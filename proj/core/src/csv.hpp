#pragma once

// Minimal CSV used for telemetry and metrics. Fields never contain commas or quotes.

#include <cstdio>
#include <filesystem>
#include <string>
#include <type_traits>
#include <vector>

namespace sharednav {

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  template <class T>
  void field(T v) {
    if constexpr (std::is_floating_point_v<T>)
      put_double(static_cast<double>(v));
    else if constexpr (std::is_signed_v<T>)
      put_int(static_cast<long long>(v));
    else
      put_uint(static_cast<unsigned long long>(v));
  }
  void end_row();
  void close();

 private:
  void sep();
  void put_double(double v);
  void put_int(long long v);
  void put_uint(unsigned long long v);

  std::filesystem::path path_;
  std::FILE* f_ = nullptr;
  bool first_ = true;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Throws FormatError on ragged rows.
CsvTable read_csv(const std::filesystem::path& path);

void parse_csv_field(const std::string& text, double& out, const std::filesystem::path& path, std::size_t line);
void parse_csv_field(const std::string& text, int& out, const std::filesystem::path& path, std::size_t line);
void parse_csv_field(const std::string& text, std::size_t& out, const std::filesystem::path& path, std::size_t line);

}  // namespace sharednav
