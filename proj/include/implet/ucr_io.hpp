#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "implet/core.hpp"
#include "implet/error.hpp"

namespace implet {

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view tok, double& out) {
    tok = trim(tok);
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    if (tok.empty()) return false;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && ptr == tok.data() + tok.size();
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep) {
    std::vector<std::string_view> fields;
    if (sep == ' ') {
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
            std::size_t j = i;
            while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
            if (j > i) fields.push_back(line.substr(i, j - i));
            i = j;
        }
        return fields;
    }
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return fields;
}

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace detail

/// Reads a UCR-style text file: one sample per line, label first, then T values.
/// The separator (tab, comma, or whitespace) is detected from the first record.
/// Labels are remapped to 0..n_classes-1 by ascending original value.
inline LabeledDataset load_ucr_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);

    std::vector<double> raw_labels;
    LabeledDataset ds;
    char sep = 0;
    std::size_t row = 0;
    std::size_t T = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++row;
        auto body = detail::trim(line);
        if (body.empty()) continue;
        if (sep == 0) sep = body.find('\t') != std::string_view::npos ? '\t'
                          : body.find(',') != std::string_view::npos ? ','
                                                                     : ' ';
        auto fields = detail::split_fields(body, sep);
        if (fields.size() < 2) throw FormatError("record needs a label and at least one value", row);
        double label = 0.0;
        if (!detail::parse_double(fields[0], label) || !std::isfinite(label))
            throw FormatError("non-numeric label '" + std::string(fields[0]) + "'", row);
        TimeSeries ts;
        ts.id = ds.samples.size();
        ts.values.reserve(fields.size() - 1);
        for (std::size_t f = 1; f < fields.size(); ++f) {
            double v = 0.0;
            if (!detail::parse_double(fields[f], v))
                throw FormatError("non-numeric token '" + std::string(fields[f]) + "'", row);
            if (!std::isfinite(v)) throw FormatError("non-finite value", row);
            ts.values.push_back(v);
        }
        if (T == 0) T = ts.size();
        if (ts.size() != T)
            throw FormatError("ragged record: " + std::to_string(ts.size()) + " values, expected " + std::to_string(T), row);
        raw_labels.push_back(label);
        ds.samples.push_back(std::move(ts));
    }
    if (ds.samples.empty()) throw FormatError("empty file " + path);

    ds.class_values = raw_labels;
    std::sort(ds.class_values.begin(), ds.class_values.end());
    ds.class_values.erase(std::unique(ds.class_values.begin(), ds.class_values.end()), ds.class_values.end());
    ds.n_classes = static_cast<int>(ds.class_values.size());
    ds.labels.reserve(raw_labels.size());
    for (double l : raw_labels) {
        auto it = std::lower_bound(ds.class_values.begin(), ds.class_values.end(), l);
        ds.labels.push_back(static_cast<int>(it - ds.class_values.begin()));
    }
    return ds;
}

/// Writes the dataset in tab-separated UCR format using shortest round-trip
/// decimal representations. Labels are written as their original values when known.
inline void write_ucr_tsv(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto cls = static_cast<std::size_t>(ds.labels[i]);
        out << detail::format_double(cls < ds.class_values.size() ? ds.class_values[cls] : static_cast<double>(cls));
        for (double v : ds.samples[i].values) out << '\t' << detail::format_double(v);
        out << '\n';
    }
    if (!out) throw FormatError("write failed for " + path);
}

}  // namespace implet
