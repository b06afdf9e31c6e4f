#pragma once

// CSV text per RFC 4180: CRLF line ends, fields quoted when they contain a
// comma, quote or line break, doubles with 17 significant digits.

#include <cmath>
#include <cstdio>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ifseq::cli {

struct Blank {};

using CsvCell = std::variant<Blank, double, long long, std::string>;

inline std::string csv_number(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : columns_(header.size()) { append(header); }

    template <class... Cells>
    void row(Cells&&... cells) {
        add({CsvCell(std::forward<Cells>(cells))...});
    }

    void add(const std::vector<CsvCell>& cells) {
        if (cells.size() != columns_) {
            throw std::logic_error("CSV row has " + std::to_string(cells.size()) + " fields, header has " +
                                   std::to_string(columns_));
        }
        std::vector<std::string> text;
        text.reserve(cells.size());
        for (const auto& c : cells) {
            text.push_back(std::visit(
                [](const auto& v) -> std::string {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, Blank>) {
                        return "";
                    } else if constexpr (std::is_same_v<T, double>) {
                        return csv_number(v);
                    } else if constexpr (std::is_same_v<T, long long>) {
                        return std::to_string(v);
                    } else {
                        return v;
                    }
                },
                c));
        }
        append(text);
    }

    const std::string& text() const noexcept { return text_; }
    std::size_t rows() const noexcept { return rows_; }

private:
    void append(const std::vector<std::string>& fields) {
        for (std::size_t k = 0; k < fields.size(); ++k) {
            if (k > 0) {
                text_ += ',';
            }
            text_ += csv_quote(fields[k]);
        }
        text_ += "\r\n";
        ++rows_;
    }

    std::size_t columns_;
    std::string text_;
    std::size_t rows_ = 0;
};

} // namespace ifseq::cli
