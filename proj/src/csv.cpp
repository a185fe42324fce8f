#include "eeio/csv.hpp"

#include "eeio/errors.hpp"
#include "eeio/text.hpp"

#include <fstream>
#include <sstream>

namespace eeio::csv {

namespace {

std::vector<std::string> split_line(const std::string& line, std::size_t line_no, const std::string& source)
{
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c == '\r') {
            // tolerate CRLF
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) {
        throw ParseError("UnterminatedQuote", source + " line " + std::to_string(line_no));
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

std::vector<Row> read(std::istream& in, const std::string& source)
{
    std::vector<Row> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        rows.push_back(Row{line_no, split_line(line, line_no, source)});
    }
    return rows;
}

std::vector<Row> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError("FileNotFound", "cannot open " + path.string());
    }
    return read(in, path.filename().string());
}

std::vector<std::pair<std::string, std::string>> read_directives(std::istream& in)
{
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty()) {
            continue;
        }
        if (t[0] != '#') {
            break;  // directives only precede data
        }
        std::string body = trim(t.substr(1));
        auto colon = body.find(':');
        if (colon == std::string::npos) {
            continue;  // plain comment
        }
        out.emplace_back(trim(body.substr(0, colon)), trim(body.substr(colon + 1)));
    }
    return out;
}

void Writer::comment(std::string_view text)
{
    buf_ += "# ";
    buf_ += text;
    buf_ += '\n';
}

void Writer::row(const std::vector<std::string>& fields)
{
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) {
            buf_ += ',';
        }
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\n") != std::string::npos) {
            buf_ += '"';
            for (char c : f) {
                if (c == '"') {
                    buf_ += "\"\"";
                } else {
                    buf_ += c;
                }
            }
            buf_ += '"';
        } else {
            buf_ += f;
        }
    }
    buf_ += '\n';
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content)
{
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot write " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw Error("short write to " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

std::string read_file_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace eeio::csv
