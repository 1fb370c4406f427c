// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace scorefusion {

/// Flat `key = value` configuration. Lines starting with '#' are comments.
/// Only keys present in the defaults may be set, so typos fail loudly.
class Config {
public:
    Config() = default;
    explicit Config(std::map<std::string, std::string> defaults) : values_(std::move(defaults)) {}

    /// Overlays `text`; `source` names the origin in error messages.
    void merge_text(const std::string& text, const std::string& source);
    void merge_file(const std::filesystem::path& path);
    /// Parses one `key=value` override.
    void merge_assignment(const std::string& assignment);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    const std::string& str(const std::string& key) const;
    long long integer(const std::string& key) const;
    double real(const std::string& key) const;
    bool boolean(const std::string& key) const;
    std::vector<int> int_list(const std::string& key) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    /// Sorted `key = value` lines; merge_text(echo()) reproduces the config.
    std::string echo() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace scorefusion
