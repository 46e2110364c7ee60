#include "semcom/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace semcom {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::string> tokens(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string t;
    while (is >> t) out.push_back(t);
    return out;
}

}  // namespace

double parse_number(const std::string& token, const std::string& key_for_error) {
    const char* begin = token.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw ConfigError("key '" + key_for_error + "': expected number, got \"" + token +
                          "\"");
    return v;
}

ConfigDoc ConfigDoc::parse(const std::string& text) {
    ConfigDoc doc;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        auto& sec = doc.sections_[section];
        if (sec.count(key))
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key +
                              "'");
        sec[key] = Entry{value, lineno, false};
    }
    return doc;
}

ConfigDoc ConfigDoc::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse(buf.str());
}

const ConfigDoc::Entry* ConfigDoc::find(const std::string& section,
                                        const std::string& key) const {
    auto sit = sections_.find(section);
    if (sit == sections_.end()) return nullptr;
    auto kit = sit->second.find(key);
    if (kit == sit->second.end()) return nullptr;
    kit->second.consumed = true;
    return &kit->second;
}

const ConfigDoc::Entry& ConfigDoc::require(const std::string& section,
                                           const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) {
        const std::string where = section.empty() ? key : section + "." + key;
        throw ConfigError("missing required key '" + where + "'");
    }
    return *e;
}

bool ConfigDoc::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

std::string ConfigDoc::get_string(const std::string& section, const std::string& key) const {
    return require(section, key).value;
}

std::string ConfigDoc::get_string(const std::string& section, const std::string& key,
                                  const std::string& fallback) const {
    const Entry* e = find(section, key);
    return e ? e->value : fallback;
}

double ConfigDoc::get_double(const std::string& section, const std::string& key) const {
    return parse_number(require(section, key).value, key);
}

double ConfigDoc::get_double(const std::string& section, const std::string& key,
                             double fallback) const {
    const Entry* e = find(section, key);
    return e ? parse_number(e->value, key) : fallback;
}

int ConfigDoc::get_int(const std::string& section, const std::string& key,
                       int fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    const double v = parse_number(e->value, key);
    const int i = static_cast<int>(v);
    if (double(i) != v)
        throw ConfigError("key '" + key + "': expected integer, got \"" + e->value + "\"");
    return i;
}

bool ConfigDoc::get_bool(const std::string& section, const std::string& key,
                         bool fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    if (e->value == "true") return true;
    if (e->value == "false") return false;
    throw ConfigError("key '" + key + "': expected true/false, got \"" + e->value + "\"");
}

std::vector<double> ConfigDoc::get_list(const std::string& section,
                                        const std::string& key) const {
    const Entry& e = require(section, key);
    std::vector<double> out;
    for (const std::string& t : tokens(e.value)) out.push_back(parse_number(t, key));
    if (out.empty()) throw ConfigError("key '" + key + "': expected at least one number");
    return out;
}

std::vector<double> ConfigDoc::get_list(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const {
    return find(section, key) == nullptr ? fallback : get_list(section, key);
}

std::vector<std::vector<double>> ConfigDoc::get_groups(const std::string& section,
                                                       const std::string& key) const {
    const Entry& e = require(section, key);
    std::vector<std::vector<double>> out;
    for (const std::string& grp : split(e.value, ';')) {
        std::vector<double> g;
        for (const std::string& t : tokens(grp)) g.push_back(parse_number(t, key));
        if (g.empty()) throw ConfigError("key '" + key + "': empty group");
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<std::vector<std::vector<double>>> ConfigDoc::get_group_rows(
    const std::string& section, const std::string& key) const {
    const Entry& e = require(section, key);
    std::vector<std::vector<std::vector<double>>> out;
    for (const std::string& grp : split(e.value, ';')) {
        std::vector<std::vector<double>> rows;
        for (const std::string& row : split(grp, ',')) {
            std::vector<double> r;
            for (const std::string& t : tokens(row)) r.push_back(parse_number(t, key));
            if (r.empty()) throw ConfigError("key '" + key + "': empty row");
            rows.push_back(std::move(r));
        }
        out.push_back(std::move(rows));
    }
    return out;
}

void ConfigDoc::check_all_consumed() const {
    for (const auto& [section, keys] : sections_) {
        for (const auto& [key, entry] : keys) {
            if (!entry.consumed) {
                const std::string where = section.empty() ? key : section + "." + key;
                throw ConfigError("unknown key '" + where + "' (line " +
                                  std::to_string(entry.line) + ")");
            }
        }
    }
}

}  // namespace semcom
