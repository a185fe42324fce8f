#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace eeio::csv {

struct Row {
    std::size_t line_no = 0;
    std::vector<std::string> fields;
};

// Reads all rows. Blank lines and lines starting with '#' are skipped.
// Fields may be double-quoted to contain commas or quotes; embedded
// newlines are not supported. `source` names the input in error messages.
std::vector<Row> read(std::istream& in, const std::string& source);
std::vector<Row> read_file(const std::filesystem::path& path);

// Leading '#' lines that match "# key: value" are directives (used by the
// product aggregation map to declare aggregates with no source rows).
std::vector<std::pair<std::string, std::string>> read_directives(std::istream& in);

// Accumulates CSV text with '\n' line endings. Fields containing a comma
// or quote are quoted, so output re-reads identically.
class Writer {
public:
    void comment(std::string_view text);
    void row(const std::vector<std::string>& fields);
    const std::string& str() const { return buf_; }

private:
    std::string buf_;
};

// Writes via a temp file + rename so readers never observe partial output.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file_bytes(const std::filesystem::path& path);

}  // namespace eeio::csv
