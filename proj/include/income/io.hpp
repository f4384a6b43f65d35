#pragma once

// Small CSV helpers shared by the survey loaders and the CLI writers.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace income::io {

/// Render a number with 12 significant digits ("%.12g"); infinities as "inf".
std::string format_number(double value);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    /// 1-based source line of each row (header is line 1).
    std::vector<std::size_t> line_numbers;

    /// Column index of `name`; throws ValidationError when absent.
    std::size_t column(std::string_view name) const;
    bool has_column(std::string_view name) const;
};

/// Read a comma-separated file with a header row.  Blank lines and lines
/// starting with '#' are skipped.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text, std::string_view source_name = "<memory>");

/// Parse a decimal number, accepting "inf".  Empty fields yield NaN.
double parse_number(std::string_view field, std::string_view context);

/// Incremental CSV writer; each row's values are formatted with format_number.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    CsvWriter& row(const std::vector<std::string>& cells);
    std::string str() const { return out_; }
    void save(const std::filesystem::path& path) const;

private:
    std::size_t width_;
    std::string out_;
};

void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace income::io
