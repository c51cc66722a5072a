#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dyad/common.hpp"

namespace dyad::csv {

// RFC-4180 style quoting: fields containing comma, quote, or newline are
// quoted, embedded quotes doubled.
inline std::string quote_field(const std::string& field) {
    bool needs = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

inline std::string join_row(const std::vector<std::string>& fields) {
    std::string out;
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += quote_field(fields[i]);
    }
    out += '\n';
    return out;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    // source line number per row, for error context (header is line 1)
    std::vector<int> line_numbers;

    int column(const std::string& name, const std::string& file) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        fail(file, ": missing column '", name, "'");
    }
};

inline std::vector<std::string> parse_line(const std::string& line, const std::string& context) {
    std::vector<std::string> fields;
    std::string cur;
    bool in_quotes = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (in_quotes) fail(context, ": unterminated quoted field");
    fields.push_back(cur);
    return fields;
}

inline Table read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path.string(), ": cannot open file");
    Table t;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = parse_line(line, path.string() + ":" + std::to_string(line_no));
        if (line_no == 1) {
            t.header = std::move(fields);
        } else {
            if (fields.size() != t.header.size())
                fail(path.string(), ":", line_no, ": expected ", t.header.size(),
                     " fields, got ", fields.size());
            t.rows.push_back(std::move(fields));
            t.line_numbers.push_back(line_no);
        }
    }
    if (t.header.empty()) fail(path.string(), ": empty file");
    return t;
}

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : path_(path.string()) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        out_.open(path, std::ios::binary);
        if (!out_) fail(path_, ": cannot open file for writing");
    }

    void row(const std::vector<std::string>& fields) { out_ << join_row(fields); }

    void close() {
        out_.close();
        if (out_.fail()) fail(path_, ": write failed");
    }

private:
    std::string path_;
    std::ofstream out_;
};

}  // namespace dyad::csv
