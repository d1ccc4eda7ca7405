#pragma once
// Minimal CSV tables: header row, comma separated, '.' decimal separator.
// Fields never contain commas, quotes or newlines in this project's output.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ptmc::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws std::out_of_range if absent.
    std::size_t column(const std::string& name) const;
    double number(std::size_t row, const std::string& name) const;
};

/// Shortest decimal text that reads back to the same double.
std::string format(double value);

void write(std::ostream& out, const Table& table);
/// Throws FormatError when a row's width differs from the header's.
Table read(std::istream& in);

/// Writes `text` to path.tmp then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace ptmc::csv
