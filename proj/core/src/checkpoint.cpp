// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "scorefusion/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "scorefusion/errors.hpp"
#include "scorefusion/volume_io.hpp"

namespace scorefusion {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes a little-endian host");

class Writer {
public:
    template <class T>
    void pod(T v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        out_.insert(out_.end(), p, p + sizeof(T));
    }
    void str(const std::string& s) {
        pod(static_cast<std::uint32_t>(s.size()));
        out_.insert(out_.end(), s.begin(), s.end());
    }
    void floats(std::span<const float> v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
        out_.insert(out_.end(), p, p + v.size_bytes());
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

    template <class T>
    T pod() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, b_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string str() {
        const auto n = pod<std::uint32_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::vector<float> floats(std::uint64_t n) {
        if (n > (b_.size() - pos_) / sizeof(float)) throw ParseError(ParseErrorKind::truncated, "checkpoint blob truncated");
        std::vector<float> v(static_cast<std::size_t>(n));
        std::memcpy(v.data(), b_.data() + pos_, v.size() * sizeof(float));
        pos_ += v.size() * sizeof(float);
        return v;
    }
    bool done() const { return pos_ == b_.size(); }

private:
    void need(std::size_t n) const {
        if (n > b_.size() - pos_) throw ParseError(ParseErrorKind::truncated, "checkpoint truncated");
    }
    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<float> Checkpoint::flat_params(const nn::ParamLayout& layout) const {
    if (tensors.size() != layout.entries().size()) {
        throw CheckpointError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model expects " +
                              std::to_string(layout.entries().size()));
    }
    std::vector<float> out(layout.total());
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const auto& e = layout.entries()[i];
        if (tensors[i].first != e.name || tensors[i].second.size() != e.count) {
            throw CheckpointError("tensor '" + tensors[i].first + "' does not match model parameter '" + e.name + "'");
        }
        std::copy(tensors[i].second.begin(), tensors[i].second.end(), out.begin() + static_cast<std::ptrdiff_t>(e.offset));
    }
    return out;
}

void Checkpoint::set_params(const nn::ParamLayout& layout, std::span<const float> values) {
    tensors.clear();
    for (const auto& e : layout.entries()) {
        tensors.emplace_back(e.name, std::vector<float>(values.begin() + static_cast<std::ptrdiff_t>(e.offset),
                                                        values.begin() + static_cast<std::ptrdiff_t>(e.offset + e.count)));
    }
}

void Checkpoint::require_config(const std::map<std::string, std::string>& expected) const {
    for (const auto& [k, v] : expected) {
        const auto it = config.find(k);
        if (it == config.end()) throw CheckpointError("checkpoint lacks config key '" + k + "'");
        if (it->second != v) {
            throw CheckpointError("config mismatch on '" + k + "': checkpoint has '" + it->second + "', run has '" + v + "'");
        }
    }
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
    Writer w;
    w.pod<char>('S');
    w.pod<char>('F');
    w.pod<char>('C');
    w.pod<char>('K');
    w.pod(kCheckpointVersion);
    w.str(c.kind);
    w.pod(static_cast<std::uint32_t>(c.config.size()));
    for (const auto& [k, v] : c.config) {
        w.str(k);
        w.str(v);
    }
    w.pod(static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& [name, data] : c.tensors) {
        w.str(name);
        w.pod(static_cast<std::uint64_t>(data.size()));
        w.floats(data);
    }
    if (c.adam_m.size() != c.adam_v.size()) throw CheckpointError("optimizer moments differ in length");
    w.pod(static_cast<std::uint64_t>(c.adam_m.size()));
    w.floats(c.adam_m);
    w.floats(c.adam_v);
    w.pod(c.adam_step);
    w.pod(c.step);
    w.str(c.rng_state);
    return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    char magic[4];
    for (char& m : magic) m = r.pod<char>();
    if (std::memcmp(magic, "SFCK", 4) != 0) throw ParseError(ParseErrorKind::bad_magic, "not a checkpoint (bad magic)");
    const auto version = r.pod<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw ParseError(ParseErrorKind::unsupported, "unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint c;
    c.kind = r.str();
    const auto n_cfg = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_cfg; ++i) {
        std::string k = r.str();
        c.config[k] = r.str();
    }
    const auto n_t = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_t; ++i) {
        std::string name = r.str();
        const auto n = r.pod<std::uint64_t>();
        c.tensors.emplace_back(std::move(name), r.floats(n));
    }
    const auto n_m = r.pod<std::uint64_t>();
    c.adam_m = r.floats(n_m);
    c.adam_v = r.floats(n_m);
    c.adam_step = r.pod<std::int64_t>();
    c.step = r.pod<std::int64_t>();
    c.rng_state = r.str();
    if (!r.done()) throw ParseError(ParseErrorKind::trailing_data, "trailing bytes after checkpoint");
    return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(c);
    write_file_atomic(path, bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace scorefusion
