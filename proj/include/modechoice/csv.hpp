#pragma once

#include <charconv>
#include <cstdint>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "modechoice/errors.hpp"

namespace modechoice {

/// Shortest representation that parses back to the exact same double.
/// Non-finite values render as inf/-inf/nan and round-trip through
/// parse_double. This is the canonical number format for every CSV and
/// model file the library writes.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_int(std::int64_t v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw DataError(context + ": cannot parse '" + std::string(s) + "' as a number");
    }
    return v;
}

inline std::int64_t parse_int(std::string_view s, const std::string& context) {
    std::int64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw DataError(context + ": cannot parse '" + std::string(s) + "' as an integer");
    }
    return v;
}

inline std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

struct CsvTable {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    // Source line number of rows[i] (1-based, header is line 1).
    std::vector<std::size_t> line_numbers;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        return -1;
    }

    int require_column(const std::string& name) const {
        const int c = column(name);
        if (c < 0) {
            throw DataError(path + ": missing required column '" + name + "'");
        }
        return c;
    }

    std::string context(std::size_t row, std::size_t col) const {
        return path + ":" + format_int(static_cast<std::int64_t>(line_numbers[row])) +
               ": column '" + (col < header.size() ? header[col] : "?") + "'";
    }
};

/// Plain comma-separated values, UTF-8, first line is the header.
/// Fields may not contain commas or newlines; no quoting is supported.
inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    CsvTable table;
    table.path = path;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            table.header = split(line, ',');
            continue;
        }
        if (line.empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != table.header.size()) {
            throw DataError(path + ":" + format_int(static_cast<std::int64_t>(line_no)) +
                            ": expected " + format_int(static_cast<std::int64_t>(table.header.size())) +
                            " fields, got " + format_int(static_cast<std::int64_t>(fields.size())));
        }
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(line_no);
    }
    if (table.header.empty()) {
        throw DataError(path + ": missing header row");
    }
    return table;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : path_(path) {
        const auto dir = std::filesystem::path(path).parent_path();
        if (!dir.empty()) std::filesystem::create_directories(dir);
        out_.open(path, std::ios::binary);
        if (!out_) throw DataError("cannot open file for writing: " + path);
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << fields[i];
        }
        out_ << '\n';
    }

    void raw_line(const std::string& line) { out_ << line << '\n'; }

    void close() {
        out_.close();
        if (out_.fail()) throw DataError("write failed: " + path_);
    }

private:
    std::string path_;
    std::ofstream out_;
};

} // namespace modechoice
