#pragma once

#include <cstdint>
#include <fstream>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace needscope {

std::vector<std::string_view> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);
bool is_word_byte(unsigned char c);
std::string to_lower_ascii(std::string_view text);
// Lowercase ASCII, collapse whitespace runs to one space, trim both ends.
std::string normalize_text(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with(std::string_view text, std::string_view prefix);

// Shortest round-trippable decimal form; "NA" for NaN.
std::string format_double(double value);
double parse_double(std::string_view text, std::string_view what);
std::int64_t parse_int(std::string_view text, std::string_view what);

// Reads newline-terminated lines from a plain or gzip-compressed file.
// Trailing '\r' is stripped.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path);
  ~LineReader();
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  bool next(std::string& line);
  std::size_t line_number() const { return line_number_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::filesystem::path path_;
  std::size_t line_number_ = 0;
};

std::string read_file(const std::filesystem::path& path);

// Writes to `<path>.tmp` and renames onto `path` in commit(). An uncommitted
// writer removes its temporary file.
class AtomicFileWriter {
 public:
  explicit AtomicFileWriter(std::filesystem::path path);
  ~AtomicFileWriter();
  AtomicFileWriter(const AtomicFileWriter&) = delete;
  AtomicFileWriter& operator=(const AtomicFileWriter&) = delete;

  std::ostream& stream() { return out_; }
  void commit();

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Verifies that `path` names a readable regular file; throws Error(kConfig)
// naming `what` otherwise.
void require_input_file(const std::filesystem::path& path, std::string_view what);

}  // namespace needscope
