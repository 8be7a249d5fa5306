#pragma once

// Minimal reader for the unquoted, comma-separated files this toolkit writes.

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace mtm {

class CsvReader {
public:
    explicit CsvReader(const std::string& path, char sep = ',');

    /// Throws ParseError unless the first line equals `header`.
    void expect_header(std::string_view header);

    /// Next non-empty row split on the separator; false at end of file.
    /// Views stay valid until the following call.
    bool next(std::vector<std::string_view>& fields);

    std::string where() const { return path_ + ":" + std::to_string(line_no_); }

private:
    std::string path_;
    std::ifstream in_;
    std::string line_;
    std::size_t line_no_ = 0;
    char sep_;
};

std::vector<std::string_view> split(std::string_view text, char sep);

int parse_int(std::string_view s, const std::string& context = {});
std::int64_t parse_int64(std::string_view s, const std::string& context = {});
std::uint64_t parse_uint64(std::string_view s, const std::string& context = {});
double parse_double(std::string_view s, const std::string& context = {});

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace mtm
