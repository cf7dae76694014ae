// Small helpers shared by the TSV readers and writers.

#ifndef SCENE2OBJ_TSV_H_
#define SCENE2OBJ_TSV_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace scene2obj::tsv {

std::vector<std::string_view> split(std::string_view line, char sep);

// Reads a file line by line, stripping '\r' and tracking line numbers.
// Comment lines ('#' prefix) are skipped; blank lines are reported to the
// caller, which decides what they mean.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path);

  // Returns false at end of file.
  bool next(std::string& line);
  std::size_t line_number() const { return line_number_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& message) const;

 private:
  std::ifstream in_;
  std::string path_;
  std::size_t line_number_ = 0;
};

// Parsers that reject trailing garbage. Return false on malformed input.
bool parse_int(std::string_view text, std::int64_t& value);
bool parse_double(std::string_view text, double& value);

// Opens `path` for writing and emits `header` lines prefixed with "# ".
std::ofstream open_output(const std::filesystem::path& path,
                          const std::vector<std::string>& header);

}  // namespace scene2obj::tsv

#endif  // SCENE2OBJ_TSV_H_
