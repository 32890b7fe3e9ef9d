#pragma once

// Key-value configuration: INI/TOML-style sections of `key = value` lines,
// `#` comments. Values stay strings until a typed getter is called. The
// canonical serialization (sorted sections and keys) feeds the FNV-1a
// provenance hash embedded in output artifacts.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stdk/common.hpp"

namespace stdk {

class ConfigFile {
  public:
    ConfigFile() = default;

    static ConfigFile parse(std::istream& in, const std::string& origin = "<config>") {
        ConfigFile cfg;
        std::string line, section;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            std::string s = trim(line);
            if (s.empty() || s[0] == '#') continue;
            if (s.front() == '[') {
                if (s.back() != ']')
                    throw parse_error(strf("%s line %zu: unterminated section header",
                                           origin.c_str(), line_no));
                section = trim(s.substr(1, s.size() - 2));
                if (section.empty())
                    throw parse_error(strf("%s line %zu: empty section name", origin.c_str(),
                                           line_no));
                cfg.sections_[section];  // touch so empty sections canonicalize
                continue;
            }
            size_t eq = s.find('=');
            if (eq == std::string::npos)
                throw parse_error(strf("%s line %zu: expected 'key = value'", origin.c_str(),
                                       line_no));
            std::string key = trim(s.substr(0, eq));
            std::string value = trim(s.substr(eq + 1));
            if (key.empty())
                throw parse_error(strf("%s line %zu: empty key", origin.c_str(), line_no));
            cfg.sections_[section][key] = value;
        }
        return cfg;
    }

    static ConfigFile parse_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw io_error("cannot open config file: " + path);
        return parse(in, path);
    }

    bool has(const std::string& section, const std::string& key) const {
        auto sit = sections_.find(section);
        return sit != sections_.end() && sit->second.count(key) > 0;
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        sections_[section][key] = value;
    }

    std::string get_string(const std::string& section, const std::string& key) const {
        auto sit = sections_.find(section);
        if (sit != sections_.end()) {
            auto kit = sit->second.find(key);
            if (kit != sit->second.end()) return kit->second;
        }
        throw invalid_argument_error(strf("config: missing key %s.%s", section.c_str(),
                                          key.c_str()));
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
        return has(section, key) ? get_string(section, key) : fallback;
    }

    double get_double(const std::string& section, const std::string& key) const {
        return to_double(get_string(section, key), section, key);
    }
    double get_double(const std::string& section, const std::string& key, double fallback) const {
        return has(section, key) ? get_double(section, key) : fallback;
    }

    uint64_t get_u64(const std::string& section, const std::string& key) const {
        const std::string s = get_string(section, key);
        char* end = nullptr;
        unsigned long long v = std::strtoull(s.c_str(), &end, 10);
        if (end != s.c_str() + s.size() || s.empty())
            throw invalid_argument_error(strf("config: %s.%s: bad integer '%s'", section.c_str(),
                                              key.c_str(), s.c_str()));
        return static_cast<uint64_t>(v);
    }
    uint64_t get_u64(const std::string& section, const std::string& key, uint64_t fallback) const {
        return has(section, key) ? get_u64(section, key) : fallback;
    }

    size_t get_size(const std::string& section, const std::string& key) const {
        return static_cast<size_t>(get_u64(section, key));
    }
    size_t get_size(const std::string& section, const std::string& key, size_t fallback) const {
        return has(section, key) ? get_size(section, key) : fallback;
    }

    // Comma-separated list of nonnegative integers, e.g. `9,17,35,73`.
    std::vector<size_t> get_sizes(const std::string& section, const std::string& key) const {
        std::string s = get_string(section, key);
        std::vector<size_t> out;
        std::istringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) {
            std::string t = trim(item);
            char* end = nullptr;
            unsigned long long v = std::strtoull(t.c_str(), &end, 10);
            if (t.empty() || end != t.c_str() + t.size())
                throw invalid_argument_error(strf("config: %s.%s: bad list entry '%s'",
                                                  section.c_str(), key.c_str(), t.c_str()));
            out.push_back(static_cast<size_t>(v));
        }
        if (out.empty())
            throw invalid_argument_error(strf("config: %s.%s: empty list", section.c_str(),
                                              key.c_str()));
        return out;
    }
    std::vector<size_t> get_sizes(const std::string& section, const std::string& key,
                                  std::vector<size_t> fallback) const {
        return has(section, key) ? get_sizes(section, key) : fallback;
    }

    // Sorted, normalized text form; equal configurations canonicalize
    // identically regardless of ordering or whitespace in the source file.
    std::string canonical() const {
        std::string out;
        for (const auto& [section, kv] : sections_) {
            out += "[" + section + "]\n";
            for (const auto& [key, value] : kv) out += key + " = " + value + "\n";
        }
        return out;
    }

    uint64_t hash() const { return fnv1a64(canonical()); }

    const std::map<std::string, std::map<std::string, std::string>>& sections() const {
        return sections_;
    }

  private:
    static std::string trim(const std::string& s) {
        size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    static double to_double(const std::string& s, const std::string& section,
                            const std::string& key) {
        char* end = nullptr;
        double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size())
            throw invalid_argument_error(strf("config: %s.%s: bad number '%s'", section.c_str(),
                                              key.c_str(), s.c_str()));
        return v;
    }

    std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace stdk
