#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "spidr/core.hpp"

namespace spidr {

/// Unreadable file or malformed content.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CsvTable {
    std::vector<std::string> header;  ///< empty when the file had none
    Dataset data;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_double(std::string_view field, std::size_t line_no, std::size_t col) {
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
        throw IoError("line " + std::to_string(line_no) + ", column " + std::to_string(col) +
                      ": not a finite number: '" + std::string(field) + "'");
    }
    return v;
}

}  // namespace detail

/// Parses comma-separated numeric data: first column is the response, the
/// rest are predictors. Blank lines are skipped. Every malformed field or
/// ragged row is reported with its 1-based line number.
inline CsvTable parse_csv(std::istream& in, bool has_header) {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    bool header_pending = has_header;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_commas(line);
        if (header_pending) {
            header_pending = false;
            for (auto f : fields) header.emplace_back(f);
            width = fields.size();
            continue;
        }
        if (width == 0) width = fields.size();
        if (fields.size() != width) {
            throw IoError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                          " fields, found " + std::to_string(fields.size()));
        }
        std::vector<double> row(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) row[c] = detail::parse_double(fields[c], line_no, c + 1);
        rows.push_back(std::move(row));
    }
    if (in.bad()) throw IoError("read error");
    if (width < 2) throw IoError("need a response column and at least one predictor column");
    if (rows.size() < 2) throw IoError("need at least 2 data rows, found " + std::to_string(rows.size()));

    const auto n = static_cast<Index>(rows.size());
    const auto p = static_cast<Index>(width - 1);
    VectorXd y(n);
    MatrixXd X(n, p);
    for (Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        y[i] = r[0];
        for (Index j = 0; j < p; ++j) X(i, j) = r[static_cast<std::size_t>(j + 1)];
    }
    return CsvTable{std::move(header), Dataset(std::move(y), std::move(X))};
}

inline CsvTable read_csv(const std::string& path, bool has_header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    try {
        return parse_csv(in, has_header);
    } catch (const IoError& e) {
        throw IoError(path + ": " + e.what());
    }
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline void write_csv(std::ostream& out, const Dataset& data, const std::vector<std::string>& header = {}) {
    if (!header.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
        out << '\n';
    }
    for (Index i = 0; i < data.n(); ++i) {
        out << format_double(data.y()[i]);
        for (Index j = 0; j < data.p(); ++j) out << ',' << format_double(data.X()(i, j));
        out << '\n';
    }
}

inline void write_csv(const std::string& path, const Dataset& data, const std::vector<std::string>& header = {}) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    write_csv(out, data, header);
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace spidr
