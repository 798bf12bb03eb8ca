// SPDX-License-Identifier: Apache-2.0
//
// Column-oriented result tables and their CSV form (RFC 4180, CRLF line
// endings, '.' decimal point, shortest round-trip number formatting).

#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace irslab {

inline constexpr std::string_view kVersion = "v0.1.0";

struct Column {
    std::string name;
    std::vector<double> values;

    friend bool operator==(const Column&, const Column&) = default;
};

struct ResultSeries {
    std::string name;    // file stem, unique within an experiment
    std::string x_name;  // "gbar_db" for curves, "snr" for distributions
    std::vector<double> x;
    std::vector<Column> columns;
    nlohmann::json metadata = nlohmann::json::object();

    const Column* find(std::string_view column) const {
        for (const auto& c : columns)
            if (c.name == column) return &c;
        return nullptr;
    }

    const std::vector<double>& at(std::string_view column) const {
        if (const auto* c = find(column)) return c->values;
        throw std::out_of_range("series '" + name + "': missing column '" + std::string(column) + "'");
    }

    void add(std::string column, std::vector<double> values) {
        if (values.size() != x.size())
            throw std::invalid_argument("series '" + name + "': column '" + column + "' has " +
                                        std::to_string(values.size()) + " rows, x has " + std::to_string(x.size()));
        columns.push_back({std::move(column), std::move(values)});
    }

    void validate() const {
        for (const auto& c : columns) {
            if (c.values.size() != x.size())
                throw std::invalid_argument("series '" + name + "': column '" + c.name + "' length mismatch");
        }
    }

    friend bool operator==(const ResultSeries&, const ResultSeries&) = default;
};

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    if (res.ec != std::errc{}) throw std::runtime_error("format_number: conversion failed");
    return std::string(buf, res.ptr);
}

inline double parse_number(std::string_view text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end)
        throw std::invalid_argument("cannot parse number '" + std::string(text) + "'");
    return v;
}

namespace detail {

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

// Splits one record. Quoted fields may span lines.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool quoted = false;
    bool any = false;
    char ch;
    while (in.get(ch)) {
        any = true;
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get(ch);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch == '\r') {
            if (in.peek() == '\n') in.get(ch);
            break;
        } else if (ch == '\n') {
            break;
        } else {
            field += ch;
        }
    }
    if (!any) return false;
    if (quoted) throw std::invalid_argument("csv: unterminated quoted field");
    fields.push_back(std::move(field));
    return true;
}

}  // namespace detail

inline void write_csv(std::ostream& out, const ResultSeries& s) {
    s.validate();
    out << detail::csv_field(s.x_name);
    for (const auto& c : s.columns) out << ',' << detail::csv_field(c.name);
    out << "\r\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        out << format_number(s.x[i]);
        for (const auto& c : s.columns) out << ',' << format_number(c.values[i]);
        out << "\r\n";
    }
}

/// Reads the table part of a series; name and metadata are left to the caller.
inline ResultSeries read_csv(std::istream& in) {
    ResultSeries s;
    std::vector<std::string> fields;
    if (!detail::read_csv_record(in, fields) || fields.empty() || fields[0].empty())
        throw std::invalid_argument("csv: missing header");
    s.x_name = fields[0];
    for (std::size_t i = 1; i < fields.size(); ++i) s.columns.push_back({fields[i], {}});
    std::size_t row = 1;
    while (detail::read_csv_record(in, fields)) {
        ++row;
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != s.columns.size() + 1)
            throw std::invalid_argument("csv: row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                                        " fields, header has " + std::to_string(s.columns.size() + 1));
        s.x.push_back(parse_number(fields[0]));
        for (std::size_t i = 0; i < s.columns.size(); ++i) s.columns[i].values.push_back(parse_number(fields[i + 1]));
    }
    return s;
}

inline std::string to_csv_string(const ResultSeries& s) {
    std::ostringstream out;
    write_csv(out, s);
    return out.str();
}

}  // namespace irslab
