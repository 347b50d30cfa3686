#include "trpca/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace trpca {

namespace {

using json = nlohmann::json;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    while (!lines.empty() && trim(lines.back()).empty()) {
        lines.pop_back();
    }
    return lines;
}

std::optional<double> try_number(std::string_view text) {
    text = trim(text);
    if (text.empty()) {
        return std::nullopt;
    }
    if (text.front() == '+') {
        text.remove_prefix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return value;
}

bool is_missing_token(std::string_view text) {
    const std::string t = lower(trim(text));
    return t.empty() || t == "nan" || t == "na" || t == "null";
}

template <typename Cell>
std::vector<std::vector<Cell>> read_grid(const std::filesystem::path& path,
                                         Cell (*convert)(std::string_view, std::size_t,
                                                         std::size_t)) {
    const std::string text = read_text_file(path);
    std::vector<std::vector<Cell>> grid;
    const auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto cells = split_csv_line(lines[i]);
        if (!grid.empty() && cells.size() != grid.front().size()) {
            throw IoError(path.string() + ": line " + std::to_string(i + 1) + " has " +
                          std::to_string(cells.size()) + " cells, expected " +
                          std::to_string(grid.front().size()));
        }
        std::vector<Cell> row;
        row.reserve(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j) {
            row.push_back(convert(cells[j], i, j));
        }
        grid.push_back(std::move(row));
    }
    if (grid.empty() || grid.front().empty()) {
        throw IoError(path.string() + ": empty matrix");
    }
    return grid;
}

std::optional<double> matrix_cell(std::string_view cell, std::size_t, std::size_t) {
    auto v = parse_cell(cell);
    if (v && !std::isfinite(*v)) {
        return std::nullopt;
    }
    return v;
}

bool mask_cell(std::string_view cell, std::size_t i, std::size_t j) {
    const auto t = trim(cell);
    if (t == "1" || lower(t) == "true") {
        return true;
    }
    if (t == "0" || lower(t) == "false") {
        return false;
    }
    throw IoError("mask: cell (" + std::to_string(i + 1) + ", " + std::to_string(j + 1) +
                  ") is not 0 or 1");
}

}  // namespace

std::string format_double(double value) {
    if (std::isnan(value)) {
        return "NaN";
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc()) {
        throw IoError("format_double: conversion failed");
    }
    return std::string(buf.data(), ptr);
}

std::optional<double> parse_cell(std::string_view text) {
    if (is_missing_token(text)) {
        return std::nullopt;
    }
    if (const auto v = try_number(text)) {
        return v;
    }
    throw IoError("not a number: '" + std::string(trim(text)) + "'");
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(current));
            current.clear();
        } else if (c != '\r') {
            current += c;
        }
    }
    cells.push_back(std::move(current));
    return cells;
}

SignalSeries read_series_csv(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    const auto lines = split_lines(text);
    SignalSeries series;
    std::size_t width = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto cells = split_csv_line(lines[i]);
        if (cells.size() > 2) {
            throw IoError(path.string() + ": line " + std::to_string(i + 1) +
                          " has more than two columns");
        }
        if (width == 0) {
            width = cells.size();
        } else if (cells.size() != width && !trim(lines[i]).empty()) {
            throw IoError(path.string() + ": line " + std::to_string(i + 1) +
                          " has an inconsistent number of columns");
        }
        const std::string_view value = cells.size() == 2 ? cells[1] : cells[0];
        if (i == 0 && !is_missing_token(value) && !try_number(value)) {
            continue;  // header row
        }
        try {
            const auto v = parse_cell(value);
            series.values.push_back(v && std::isfinite(*v) ? v : std::nullopt);
        } catch (const IoError& e) {
            throw IoError(path.string() + ": line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    if (series.values.empty()) {
        throw IoError(path.string() + ": no samples");
    }
    return series;
}

void write_series_csv(const std::filesystem::path& path, const SignalSeries& series) {
    std::string out = "value\n";
    for (const auto& v : series.values) {
        out += v ? format_double(*v) : std::string("NaN");
        out += '\n';
    }
    write_text_file(path, out);
}

ObservationMatrix read_matrix_csv(const std::filesystem::path& path) {
    const auto grid = read_grid<std::optional<double>>(path, &matrix_cell);
    const Index m = static_cast<Index>(grid.size());
    const Index n = static_cast<Index>(grid.front().size());
    Matrix data = Matrix::Zero(m, n);
    BoolMatrix mask = BoolMatrix::Constant(m, n, false);
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (const auto& v = grid[i][j]) {
                data(i, j) = *v;
                mask(i, j) = true;
            }
        }
    }
    return ObservationMatrix(std::move(data), std::move(mask));
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& data,
                      const BoolMatrix* mask) {
    if (mask && (mask->rows() != data.rows() || mask->cols() != data.cols())) {
        throw std::invalid_argument("write_matrix_csv: mask shape mismatch");
    }
    std::string out;
    for (Index i = 0; i < data.rows(); ++i) {
        for (Index j = 0; j < data.cols(); ++j) {
            if (j > 0) {
                out += ',';
            }
            out += (mask && !(*mask)(i, j)) ? std::string("NaN") : format_double(data(i, j));
        }
        out += '\n';
    }
    write_text_file(path, out);
}

BoolMatrix read_mask_csv(const std::filesystem::path& path) {
    const auto grid = read_grid<bool>(path, &mask_cell);
    BoolMatrix mask(static_cast<Index>(grid.size()), static_cast<Index>(grid.front().size()));
    for (Index i = 0; i < mask.rows(); ++i) {
        for (Index j = 0; j < mask.cols(); ++j) {
            mask(i, j) = grid[i][j];
        }
    }
    return mask;
}

void write_mask_csv(const std::filesystem::path& path, const BoolMatrix& mask) {
    std::string out;
    for (Index i = 0; i < mask.rows(); ++i) {
        for (Index j = 0; j < mask.cols(); ++j) {
            if (j > 0) {
                out += ',';
            }
            out += mask(i, j) ? '1' : '0';
        }
        out += '\n';
    }
    write_text_file(path, out);
}

ObservationMatrix apply_mask(ObservationMatrix observed, const BoolMatrix& mask) {
    if (mask.rows() != observed.rows() || mask.cols() != observed.cols()) {
        throw IoError("mask shape " + std::to_string(mask.rows()) + "x" +
                      std::to_string(mask.cols()) + " does not match data shape " +
                      std::to_string(observed.rows()) + "x" + std::to_string(observed.cols()));
    }
    BoolMatrix combined = observed.mask.array() && mask.array();
    Matrix data = observed.data;
    for (Index j = 0; j < data.cols(); ++j) {
        for (Index i = 0; i < data.rows(); ++i) {
            if (!combined(i, j)) {
                data(i, j) = 0.0;
            }
        }
    }
    return ObservationMatrix(std::move(data), std::move(combined));
}

ConfigEntries parse_config(std::string_view text) {
    ConfigEntries entries;
    const auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line = trim(lines[i]);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(i + 1) + ": expected key=value");
        }
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(i + 1) + ": empty key");
        }
        entries.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
    }
    return entries;
}

ConfigEntries read_config_file(const std::filesystem::path& path) {
    return parse_config(read_text_file(path));
}

void write_config_file(const std::filesystem::path& path, const ConfigEntries& entries) {
    std::string out;
    for (const auto& [key, value] : entries) {
        out += key + "=" + value + "\n";
    }
    write_text_file(path, out);
}

StreamRecord parse_stream_record(std::string_view line, std::optional<Index> rows) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw IoError(std::string("malformed record: ") + e.what());
    }
    if (!j.is_object() || !j.contains("values") || !j.at("values").is_array()) {
        throw IoError("malformed record: expected an object with a \"values\" array");
    }
    const auto& values = j.at("values");
    const Index m = static_cast<Index>(values.size());
    if (rows && m != *rows) {
        throw IoError("malformed record: " + std::to_string(m) + " values, expected " +
                      std::to_string(*rows));
    }
    StreamRecord record;
    if (j.contains("t")) {
        if (!j.at("t").is_number_integer()) {
            throw IoError("malformed record: \"t\" must be an integer");
        }
        record.t = j.at("t").get<long long>();
    }
    record.values = Vector::Zero(m);
    record.mask = BoolVector::Constant(m, false);
    for (Index i = 0; i < m; ++i) {
        const auto& v = values[static_cast<std::size_t>(i)];
        if (v.is_null()) {
            continue;
        }
        if (!v.is_number()) {
            throw IoError("malformed record: value " + std::to_string(i) + " is not a number");
        }
        const double x = v.get<double>();
        if (std::isfinite(x)) {
            record.values(i) = x;
            record.mask(i) = true;
        }
    }
    return record;
}

std::string format_stream_record(const StreamRecord& record) {
    json j = json::object();
    if (record.t) {
        j["t"] = *record.t;
    }
    json values = json::array();
    for (Index i = 0; i < record.values.size(); ++i) {
        if (record.mask.size() == record.values.size() && !record.mask(i)) {
            values.push_back(nullptr);
        } else {
            values.push_back(record.values(i));
        }
    }
    j["values"] = std::move(values);
    return j.dump();
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string() + " for reading");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) {
        throw IoError("error while reading " + path.string());
    }
    return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + tmp.string() + " for writing");
        }
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        out.flush();
        if (!out) {
            throw IoError("error while writing " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move output into place at " + path.string());
    }
}

}  // namespace trpca
