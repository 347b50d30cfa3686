#pragma once

#include "trpca/timeseries.hpp"
#include "trpca/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace trpca {

/// Shortest decimal text that parses back to exactly the same double.
[[nodiscard]] std::string format_double(double value);

/// Parses one CSV cell. Empty cells and NaN/NA spellings are missing.
/// Throws IoError on anything else that is not a number.
[[nodiscard]] std::optional<double> parse_cell(std::string_view text);

[[nodiscard]] std::vector<std::string> split_csv_line(std::string_view line);

/**
 * Reads a series from CSV: either a single value column or (timestamp, value)
 * rows. A first row whose value cell is not numeric is treated as a header.
 */
[[nodiscard]] SignalSeries read_series_csv(const std::filesystem::path& path);
void write_series_csv(const std::filesystem::path& path, const SignalSeries& series);

/// Matrix CSV without header; missing cells are empty or NaN.
[[nodiscard]] ObservationMatrix read_matrix_csv(const std::filesystem::path& path);
/// Writes every cell; cells outside `mask` (when given) are written as NaN.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& data,
                      const BoolMatrix* mask = nullptr);

/// 0/1 matrix CSV.
[[nodiscard]] BoolMatrix read_mask_csv(const std::filesystem::path& path);
void write_mask_csv(const std::filesystem::path& path, const BoolMatrix& mask);

/// Restricts `observed` to the cells set in a separately stored mask.
[[nodiscard]] ObservationMatrix apply_mask(ObservationMatrix observed, const BoolMatrix& mask);

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/**
 * Flat key=value file. Blank lines and lines starting with '#' are ignored,
 * whitespace around keys and values is trimmed. Throws ConfigError on a line
 * without '=' or with an empty key.
 */
[[nodiscard]] ConfigEntries parse_config(std::string_view text);
[[nodiscard]] ConfigEntries read_config_file(const std::filesystem::path& path);
void write_config_file(const std::filesystem::path& path, const ConfigEntries& entries);

/// One streamed column: {"values": [number|null, ...]} with optional "t".
struct StreamRecord {
    std::optional<long long> t;
    Vector values;
    BoolVector mask;
};

/// Parses one NDJSON line. Throws IoError when malformed or when `rows` is
/// given and the length differs.
[[nodiscard]] StreamRecord parse_stream_record(std::string_view line,
                                               std::optional<Index> rows = std::nullopt);
[[nodiscard]] std::string format_stream_record(const StreamRecord& record);

[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace trpca
