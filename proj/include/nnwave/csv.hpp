#ifndef NNWAVE_CSV_HPP
#define NNWAVE_CSV_HPP

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nnwave/errors.hpp"

namespace nnwave::csv {

// Minimal delimited-text helpers for the numeric CSVs this project reads and
// writes. No quoting: every file format here is plain numeric columns.
// Numbers go through std::from_chars/std::to_chars so parsing is
// locale-independent and formatting is the shortest round-trip form, which
// keeps rerun outputs byte-identical.

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (true) {
        size_t next = line.find(sep, pos);
        if (next == std::string_view::npos) {
            out.push_back(trim(line.substr(pos)));
            break;
        }
        out.push_back(trim(line.substr(pos, next - pos)));
        pos = next + 1;
    }
    return out;
}

// Separator autodetection: tab wins if the header contains one, else comma.
inline char detect_sep(std::string_view header) {
    return header.find('\t') != std::string_view::npos ? '\t' : ',';
}

inline double parse_double(const std::string& tok, int row, const std::string& col) {
    double v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        throw ParseError("row " + std::to_string(row) + ", column '" + col +
                         "': malformed numeric field '" + tok + "'");
    return v;
}

inline long parse_int(const std::string& tok, int row, const std::string& col) {
    long v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        throw ParseError("row " + std::to_string(row) + ", column '" + col +
                         "': malformed integer field '" + tok + "'");
    return v;
}

inline std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes via a temp file + rename so partially written outputs never appear
// under the final name.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write file: " + tmp.string());
        out << content;
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed: " + path.string() + ": " + ec.message());
}

// Splits text into lines, dropping a trailing empty line.
inline std::vector<std::string> lines_of(std::string_view text) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            out.emplace_back(text.substr(pos));
            break;
        }
        out.emplace_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return out;
}

}  // namespace nnwave::csv

#endif
