// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "scorefusion/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "scorefusion/errors.hpp"

namespace scorefusion {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
    if (!has(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
}

void Config::merge_text(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(t.substr(0, eq));
        if (!has(key)) throw ConfigError(source + ":" + std::to_string(lineno) + ": unknown config key '" + key + "'");
        values_[key] = trim(t.substr(eq + 1));
    }
}

void Config::merge_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    merge_text(ss.str(), path.string());
}

void Config::merge_assignment(const std::string& assignment) {
    if (assignment.find('=') == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    merge_text(assignment, "--set");
}

const std::string& Config::str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

long long Config::integer(const std::string& key) const {
    const std::string& s = str(key);
    long long v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError(key + " must be an integer, got '" + s + "'");
    return v;
}

double Config::real(const std::string& key) const {
    const std::string& s = str(key);
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + " must be a number, got '" + s + "'");
}

bool Config::boolean(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "true" || s == "on" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "off" || s == "0" || s == "no") return false;
    throw ConfigError(key + " must be on/off, got '" + s + "'");
}

std::vector<int> Config::int_list(const std::string& key) const {
    std::vector<int> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        int v = 0;
        const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
        if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size()) {
            throw ConfigError(key + " must be a comma-separated integer list, got '" + str(key) + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError(key + " must not be empty");
    return out;
}

std::string Config::echo() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
    return os.str();
}

}  // namespace scorefusion
