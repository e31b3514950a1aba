#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace ezsdu {

/// "%.17g"; non-finite values print as inf, -inf, nan.
std::string format_number(double value);

using CsvCell = std::variant<double, long long, bool, std::string>;

/// RFC-4180 style table: comma separated, '\n' line ends, strings quoted only
/// when they contain a comma, quote or newline.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    /// Throws DimensionMismatch when the row width differs from the header.
    void add_row(std::vector<CsvCell> row);

    const std::vector<std::string>& columns() const { return columns_; }
    std::size_t size() const { return rows_.size(); }
    void write(std::ostream& out) const;
    std::string str() const;

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<CsvCell>> rows_;
};

/// Throws IoError when the file cannot be written.
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// Throws IoError when the file cannot be read.
std::string read_text_file(const std::filesystem::path& path);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(const std::string& data);

}  // namespace ezsdu
