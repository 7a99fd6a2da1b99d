#include "csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "sharednav/error.hpp"

namespace sharednav {

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path) {
  f_ = std::fopen(path.c_str(), "w");
  if (!f_) throw Error("cannot write " + path.string());
  for (const auto& h : header) {
    sep();
    std::fputs(h.c_str(), f_);
  }
  end_row();
}

CsvWriter::~CsvWriter() {
  if (f_) std::fclose(f_);
}

void CsvWriter::sep() {
  if (!first_) std::fputc(',', f_);
  first_ = false;
}

void CsvWriter::put_double(double v) {
  sep();
  std::fprintf(f_, "%.17g", v);
}

void CsvWriter::put_int(long long v) {
  sep();
  std::fprintf(f_, "%lld", v);
}

void CsvWriter::put_uint(unsigned long long v) {
  sep();
  std::fprintf(f_, "%llu", v);
}

void CsvWriter::end_row() {
  std::fputc('\n', f_);
  first_ = true;
}

void CsvWriter::close() {
  if (!f_) return;
  const bool bad = std::ferror(f_) != 0;
  const bool closed = std::fclose(f_) == 0;
  f_ = nullptr;
  if (bad || !closed) throw Error("error writing " + path_.string());
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split(line);
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != t.header.size())
      throw FormatError(path.string() + ":" + std::to_string(n) + ": expected " + std::to_string(t.header.size()) +
                        " fields, got " + std::to_string(row.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace {

[[noreturn]] void bad_field(const std::string& text, const std::filesystem::path& path, std::size_t line) {
  throw FormatError(path.string() + ":" + std::to_string(line) + ": bad field '" + text + "'");
}

template <class T>
void parse_integral(const std::string& text, T& out, const std::filesystem::path& path, std::size_t line) {
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc() || p != end) bad_field(text, path, line);
}

}  // namespace

void parse_csv_field(const std::string& text, double& out, const std::filesystem::path& path, std::size_t line) {
  try {
    std::size_t pos = 0;
    out = std::stod(text, &pos);
    if (pos != text.size()) bad_field(text, path, line);
  } catch (const std::logic_error&) {
    bad_field(text, path, line);
  }
}

void parse_csv_field(const std::string& text, int& out, const std::filesystem::path& path, std::size_t line) {
  parse_integral(text, out, path, line);
}

void parse_csv_field(const std::string& text, std::size_t& out, const std::filesystem::path& path, std::size_t line) {
  parse_integral(text, out, path, line);
}

}  // namespace sharednav
