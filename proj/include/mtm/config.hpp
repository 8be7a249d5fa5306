#pragma once

// Versioned key/value run configuration.
//
//     # comment
//     config_version = 1
//     seed = 123
//     world.n_agents = 2000
//
// Keys are dotted names; values run to the end of the line (trimmed).

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mtm {

inline constexpr int kConfigVersion = 1;

class Config {
public:
    Config() = default;

    static Config parse(std::string_view text, const std::string& origin = "<config>");
    static Config load(const std::string& path);

    bool has(const std::string& key) const { return values_.contains(key); }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get(const std::string& key, const std::string& fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    /// Whitespace-separated list.
    std::vector<std::string> get_list(const std::string& key) const;

    /// Throws ConfigError naming the first key not in `known`.
    void require_known(const std::set<std::string>& known) const;

    /// Canonical text form (sorted keys); stable across runs.
    std::string to_text() const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
    std::string origin_ = "<config>";
};

}  // namespace mtm
