#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace semcom {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Nested key-value text:
///   - `key = value` lines; `[section]` headers group keys; `#` starts a comment
///   - values are whitespace-separated scalars; `;` separates groups
///     (e.g. mixture components), `,` separates rows within a group
///   - duplicate keys are rejected; every key must be consumed by the typed
///     reader (strict mode), unknown keys are fatal
class ConfigDoc {
public:
    static ConfigDoc parse(const std::string& text);
    static ConfigDoc parse_file(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key,
                      double fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> get_list(const std::string& section, const std::string& key) const;
    std::vector<double> get_list(const std::string& section, const std::string& key,
                                 const std::vector<double>& fallback) const;
    /// `;`-separated groups of numbers.
    std::vector<std::vector<double>> get_groups(const std::string& section,
                                                const std::string& key) const;
    /// `;`-separated groups of `,`-separated rows.
    std::vector<std::vector<std::vector<double>>> get_group_rows(
        const std::string& section, const std::string& key) const;

    /// Throws naming the first present-but-never-read key.
    void check_all_consumed() const;

private:
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool consumed = false;
    };
    // section -> key -> entry; "" is the top-level section
    std::map<std::string, std::map<std::string, Entry>> sections_;

    const Entry& require(const std::string& section, const std::string& key) const;
    const Entry* find(const std::string& section, const std::string& key) const;
};

double parse_number(const std::string& token, const std::string& key_for_error);

}  // namespace semcom
