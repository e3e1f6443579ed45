#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "aki/common.hpp"

namespace aki {

// Minimal delimited-table reader: header row required, double-quote quoting,
// configurable single-character delimiter.
class DelimitedReader {
  public:
    DelimitedReader(std::istream& in, char delim = ',') : in_(in), delim_(delim) {
        std::string line;
        if (!std::getline(in_, line)) throw InputError("empty table: missing header row");
        header_ = split(line);
        for (std::size_t i = 0; i < header_.size(); ++i) columns_[header_[i]] = i;
    }

    const std::vector<std::string>& header() const { return header_; }

    bool has_column(const std::string& name) const { return columns_.count(name) > 0; }

    std::size_t column(const std::string& name) const {
        auto it = columns_.find(name);
        if (it == columns_.end()) throw ConfigError("missing required column: " + name);
        return it->second;
    }

    // Returns false at end of input.  line_no is 1-based including the header.
    bool next(std::vector<std::string>& fields, std::size_t& line_no) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            if (line.empty()) continue;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            fields = split(line);
            line_no = line_;
            return true;
        }
        return false;
    }

  private:
    std::vector<std::string> split(const std::string& line) const {
        std::vector<std::string> out;
        std::string cur;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        cur += '"';
                        ++i;
                    } else {
                        quoted = false;
                    }
                } else {
                    cur += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == delim_) {
                out.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        out.push_back(cur);
        return out;
    }

    std::istream& in_;
    char delim_;
    std::vector<std::string> header_;
    std::unordered_map<std::string, std::size_t> columns_;
    std::size_t line_ = 1;
};

inline std::string csv_quote(const std::string& s, char delim) {
    if (s.find(delim) == std::string::npos && s.find('"') == std::string::npos &&
        s.find('\n') == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

inline void write_row(std::ostream& os, const std::vector<std::string>& fields, char delim = ',') {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) os << delim;
        os << csv_quote(fields[i], delim);
    }
    os << '\n';
}

// Fixed-format numeric printing so report files are byte-identical per seed.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace aki
