#include "mtm/csv.hpp"

#include "mtm/errors.hpp"

#include <charconv>
#include <sstream>

namespace mtm {

namespace {

template <typename T>
T parse_number(std::string_view s, const std::string& context, const char* what) {
    T value{};
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (!s.empty() && s.front() == '+') {
        ++begin;
    }
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || s.empty()) {
        throw ParseError((context.empty() ? std::string() : context + ": ") + "expected " + what + ", got '" +
                         std::string(s) + "'");
    }
    return value;
}

}  // namespace

CsvReader::CsvReader(const std::string& path, char sep) : path_(path), in_(path, std::ios::binary), sep_(sep) {
    if (!in_) {
        throw IoError("cannot open " + path);
    }
}

void CsvReader::expect_header(std::string_view header) {
    std::getline(in_, line_);
    ++line_no_;
    if (!line_.empty() && line_.back() == '\r') {
        line_.pop_back();
    }
    if (line_ != header) {
        throw ParseError(where() + ": unexpected header '" + line_ + "'");
    }
}

bool CsvReader::next(std::vector<std::string_view>& fields) {
    while (std::getline(in_, line_)) {
        ++line_no_;
        if (!line_.empty() && line_.back() == '\r') {
            line_.pop_back();
        }
        if (line_.empty()) {
            continue;
        }
        fields = split(line_, sep_);
        return true;
    }
    return false;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(text.substr(start));
            return out;
        }
        out.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

int parse_int(std::string_view s, const std::string& context) { return parse_number<int>(s, context, "integer"); }

std::int64_t parse_int64(std::string_view s, const std::string& context) {
    return parse_number<std::int64_t>(s, context, "integer");
}

std::uint64_t parse_uint64(std::string_view s, const std::string& context) {
    return parse_number<std::uint64_t>(s, context, "unsigned integer");
}

double parse_double(std::string_view s, const std::string& context) {
    return parse_number<double>(s, context, "number");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
        throw IoError("failed writing " + path);
    }
}

}  // namespace mtm
