#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "predtree/dataset.hpp"

namespace predtree {

/// Fixed-width decimal with enough digits to round-trip a double.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

/// RFC-style CSV: comma delimiter, doubled quotes escape a quote inside
/// a quoted field. Returns one record; quoted fields may span lines.
inline std::vector<std::string> split_csv_record(std::istream& in, bool& ok) {
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int ch;
    while ((ch = in.get()) != EOF) {
        any = true;
        char c = static_cast<char>(ch);
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get();
            break;
        } else {
            field.push_back(c);
        }
    }
    ok = any;
    if (!any) return fields;
    fields.push_back(std::move(field));
    return fields;
}

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

/// A cell parses as numeric iff the whole trimmed cell is a finite
/// decimal number.
inline std::optional<double> parse_numeric_cell(const std::string& raw) {
    const std::string cell = trim(raw);
    if (cell.empty()) return std::nullopt;
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    if (!std::isfinite(value)) return std::nullopt;
    return value;
}

inline bool needs_quoting(const std::string& s) {
    return s.find_first_of(",\"\n\r") != std::string::npos;
}

inline std::string quote_csv(const std::string& s) {
    if (!needs_quoting(s)) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

struct RawCsv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline RawCsv read_raw_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file '" + path + "'");
    RawCsv csv;
    bool ok = false;
    csv.header = split_csv_record(in, ok);
    if (!ok || csv.header.empty()) throw std::runtime_error("empty file '" + path + "'");
    std::size_t line = 1;
    while (true) {
        bool got = false;
        auto fields = split_csv_record(in, got);
        if (!got) break;
        ++line;
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        if (fields.size() != csv.header.size()) {
            throw std::runtime_error("ragged row at line " + std::to_string(line) + ": expected " +
                                     std::to_string(csv.header.size()) + " fields, got " +
                                     std::to_string(fields.size()));
        }
        csv.rows.push_back(std::move(fields));
    }
    return csv;
}

}  // namespace detail

/// Load a dataset from CSV. The named response column must parse as
/// numeric; every other column is inferred numeric iff all of its
/// non-empty cells parse as decimal numbers, and categorical otherwise.
/// `overrides` forces the kind of specific columns by name.
inline Dataset load_csv(const std::string& path, const std::string& response_column,
                        const std::map<std::string, ColumnKind>& overrides = {}) {
    auto csv = detail::read_raw_csv(path);
    if (csv.rows.empty()) throw std::runtime_error("no data rows in '" + path + "'");

    std::size_t response_idx = csv.header.size();
    for (std::size_t j = 0; j < csv.header.size(); ++j) {
        if (detail::trim(csv.header[j]) == response_column) {
            response_idx = j;
            break;
        }
    }
    if (response_idx == csv.header.size()) {
        throw std::runtime_error("missing response column '" + response_column + "'");
    }

    std::vector<double> response;
    response.reserve(csv.rows.size());
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        auto v = detail::parse_numeric_cell(csv.rows[i][response_idx]);
        if (!v) {
            throw std::runtime_error("non-numeric response at line " + std::to_string(i + 2));
        }
        response.push_back(*v);
    }

    std::vector<Column> predictors;
    for (std::size_t j = 0; j < csv.header.size(); ++j) {
        if (j == response_idx) continue;
        const std::string name = detail::trim(csv.header[j]);
        bool numeric;
        auto ov = overrides.find(name);
        if (ov != overrides.end()) {
            numeric = ov->second == ColumnKind::Numeric;
        } else {
            numeric = true;
            for (const auto& row : csv.rows) {
                const std::string cell = detail::trim(row[j]);
                if (cell.empty()) continue;
                if (!detail::parse_numeric_cell(cell)) {
                    numeric = false;
                    break;
                }
            }
        }
        if (numeric) {
            std::vector<double> values;
            values.reserve(csv.rows.size());
            for (std::size_t i = 0; i < csv.rows.size(); ++i) {
                auto v = detail::parse_numeric_cell(csv.rows[i][j]);
                if (!v) {
                    if (detail::trim(csv.rows[i][j]).empty()) {
                        throw std::runtime_error("missing value in numeric column '" + name +
                                                 "' at line " + std::to_string(i + 2));
                    }
                    throw std::runtime_error("non-numeric value in numeric column '" + name +
                                             "' at line " + std::to_string(i + 2));
                }
                values.push_back(*v);
            }
            predictors.push_back(numeric_column(name, std::move(values)));
        } else {
            std::vector<std::string> values;
            values.reserve(csv.rows.size());
            for (const auto& row : csv.rows) values.push_back(detail::trim(row[j]));
            predictors.push_back(categorical_column(name, values));
        }
    }
    return Dataset(std::move(predictors), std::move(response), response_column);
}

/// Load predictors only; any column named `drop_column` is ignored.
inline Dataset load_predictors_csv(const std::string& path, const std::string& drop_column = "",
                                   const std::map<std::string, ColumnKind>& overrides = {}) {
    auto csv = detail::read_raw_csv(path);
    if (csv.rows.empty()) throw std::runtime_error("no data rows in '" + path + "'");
    std::vector<Column> predictors;
    for (std::size_t j = 0; j < csv.header.size(); ++j) {
        const std::string name = detail::trim(csv.header[j]);
        if (!drop_column.empty() && name == drop_column) continue;
        bool numeric;
        auto ov = overrides.find(name);
        if (ov != overrides.end()) {
            numeric = ov->second == ColumnKind::Numeric;
        } else {
            numeric = true;
            for (const auto& row : csv.rows) {
                const std::string cell = detail::trim(row[j]);
                if (cell.empty()) continue;
                if (!detail::parse_numeric_cell(cell)) {
                    numeric = false;
                    break;
                }
            }
        }
        if (numeric) {
            std::vector<double> values;
            for (std::size_t i = 0; i < csv.rows.size(); ++i) {
                auto v = detail::parse_numeric_cell(csv.rows[i][j]);
                if (!v) {
                    throw std::runtime_error("missing or non-numeric value in numeric column '" +
                                             name + "' at line " + std::to_string(i + 2));
                }
                values.push_back(*v);
            }
            predictors.push_back(numeric_column(name, std::move(values)));
        } else {
            std::vector<std::string> values;
            for (const auto& row : csv.rows) values.push_back(detail::trim(row[j]));
            predictors.push_back(categorical_column(name, values));
        }
    }
    return Dataset(std::move(predictors));
}

/// Write a dataset as CSV: predictors in order, then the response column
/// (when present). Numeric cells carry full round-trip precision.
inline void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file '" + path + "'");
    for (std::size_t k = 0; k < ds.n_predictors(); ++k) {
        if (k) out << ',';
        out << detail::quote_csv(ds.predictor(k).name);
    }
    if (ds.has_response()) {
        if (ds.n_predictors()) out << ',';
        out << detail::quote_csv(ds.response_name());
    }
    out << '\n';
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        for (std::size_t k = 0; k < ds.n_predictors(); ++k) {
            if (k) out << ',';
            const auto& col = ds.predictor(k);
            if (col.kind == ColumnKind::Numeric) {
                out << format_double(col.numeric[i]);
            } else {
                out << detail::quote_csv(col.category_of_row(i));
            }
        }
        if (ds.has_response()) {
            if (ds.n_predictors()) out << ',';
            out << format_double(ds.response()[i]);
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace predtree
