#include "mtm/config.hpp"

#include "mtm/csv.hpp"
#include "mtm/errors.hpp"

#include <sstream>

namespace mtm {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::size_t line_no = 0;
    for (std::string_view line : split(text, '\n')) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) {
            throw ParseError(origin + ":" + std::to_string(line_no) + ": empty key");
        }
        if (cfg.values_.contains(key)) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        cfg.values_[key] = value;
    }
    const int version = cfg.get_int("config_version", kConfigVersion);
    if (version != kConfigVersion) {
        throw ConfigError(origin + ": unsupported config_version " + std::to_string(version));
    }
    return cfg;
}

Config Config::load(const std::string& path) { return parse(read_file(path), path); }

std::string Config::get(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

int Config::get_int(const std::string& key, int fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_int(it->second, origin_ + " key " + key);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_uint64(it->second, origin_ + " key " + key);
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_double(it->second, origin_ + " key " + key);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    if (it->second == "true" || it->second == "1" || it->second == "yes") {
        return true;
    }
    if (it->second == "false" || it->second == "0" || it->second == "no") {
        return false;
    }
    throw ParseError(origin_ + " key " + key + ": expected boolean, got '" + it->second + "'");
}

std::vector<std::string> Config::get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream in(get(key, ""));
    std::string item;
    while (in >> item) {
        out.push_back(item);
    }
    return out;
}

void Config::require_known(const std::set<std::string>& known) const {
    for (const auto& [key, value] : values_) {
        if (!known.contains(key)) {
            throw ConfigError(origin_ + ": unknown key '" + key + "'");
        }
    }
}

std::string Config::to_text() const {
    std::string out = "config_version = " + std::to_string(kConfigVersion) + "\n";
    for (const auto& [key, value] : values_) {
        if (key != "config_version") {
            out += key + " = " + value + "\n";
        }
    }
    return out;
}

}  // namespace mtm
