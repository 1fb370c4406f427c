// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace scorefusion {

/// Base of every error thrown by the library. `kind()` is a stable,
/// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

class PairingError : public Error {
public:
    explicit PairingError(const std::string& what) : Error("pairing", what) {}
};

class RangeError : public Error {
public:
    explicit RangeError(const std::string& what) : Error("range", what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class ConsistencyDomainError : public Error {
public:
    explicit ConsistencyDomainError(const std::string& what) : Error("consistency_domain", what) {}
};

class PyramidError : public Error {
public:
    explicit PyramidError(const std::string& what) : Error("pyramid", what) {}
};

class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& what) : Error("training", what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io", what) {}
};

class CheckpointError : public Error {
public:
    explicit CheckpointError(const std::string& what) : Error("checkpoint", what) {}
};

enum class ParseErrorKind { bad_magic, truncated, dim_overflow, trailing_data, non_finite, unsupported };

inline const char* to_string(ParseErrorKind k) {
    switch (k) {
        case ParseErrorKind::bad_magic: return "bad_magic";
        case ParseErrorKind::truncated: return "truncated";
        case ParseErrorKind::dim_overflow: return "dim_overflow";
        case ParseErrorKind::trailing_data: return "trailing_data";
        case ParseErrorKind::non_finite: return "non_finite";
        case ParseErrorKind::unsupported: return "unsupported";
    }
    return "unknown";
}

class ParseError : public Error {
public:
    ParseError(ParseErrorKind k, const std::string& what)
        : Error(std::string("parse.") + to_string(k), what), parse_kind_(k) {}

    ParseErrorKind parse_kind() const noexcept { return parse_kind_; }

private:
    ParseErrorKind parse_kind_;
};

}  // namespace scorefusion
