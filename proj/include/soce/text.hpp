#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "soce/errors.hpp"

namespace soce {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

inline double parse_double(std::string_view text, std::string_view context = {}) {
    // Leading whitespace is tolerated; from_chars is not.
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
        text.remove_suffix(1);
    if (text == "nan") return std::nan("");
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    double value = 0.0;
    const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
    if (result.ec != std::errc{} || result.ptr != text.data() + text.size()) {
        std::string what = "malformed number: '" + std::string(text) + "'";
        if (!context.empty()) what += " (" + std::string(context) + ")";
        throw MalformedNumber(what);
    }
    return value;
}

inline std::vector<std::string> split(std::string_view line, char separator) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(separator, start);
        if (pos == std::string_view::npos) {
            fields.emplace_back(line.substr(start));
            return fields;
        }
        fields.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string trim(std::string_view text) {
    std::size_t begin = 0;
    std::size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return std::string(text.substr(begin, end - begin));
}

/// Splits into lines, accepting LF or CRLF endings.
inline std::vector<std::string> split_lines(std::string_view content) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= content.size()) {
        std::size_t pos = content.find('\n', start);
        if (pos == std::string_view::npos) {
            if (start < content.size()) lines.emplace_back(content.substr(start));
            break;
        }
        std::size_t end = pos;
        if (end > start && content[end - 1] == '\r') --end;
        lines.emplace_back(content.substr(start, end - start));
        start = pos + 1;
    }
    return lines;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path.string());
    return buffer.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

/// Minimal comma-separated table: a header row plus string cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw MissingColumn(std::string(name));
    }
};

inline CsvTable parse_csv(std::string_view content) {
    CsvTable table;
    const auto lines = split_lines(content);
    if (lines.empty()) throw EmptySeries("CSV content has no header line");
    table.header = split(lines[0], ',');
    for (auto& name : table.header) name = trim(name);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        table.rows.push_back(split(lines[i], ','));
    }
    return table;
}

class CsvBuilder {
public:
    CsvBuilder& cell(std::string_view text) {
        if (!line_empty_) line_ += ',';
        line_ += text;
        line_empty_ = false;
        return *this;
    }
    CsvBuilder& cell(double value) { return cell(format_double(value)); }
    CsvBuilder& cell(std::size_t value) { return cell(std::to_string(value)); }
    void end_row() {
        out_ += line_;
        out_ += '\n';
        line_.clear();
        line_empty_ = true;
    }
    const std::string& str() const { return out_; }

private:
    std::string out_;
    std::string line_;
    bool line_empty_ = true;
};

} // namespace soce
