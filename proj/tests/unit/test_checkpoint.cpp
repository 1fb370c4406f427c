// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest/doctest.h>

#include <filesystem>

#include "scorefusion/checkpoint.hpp"
#include "scorefusion/errors.hpp"

using namespace scorefusion;

namespace {

nn::ParamLayout layout() {
    nn::ParamLayout l;
    l.add("w", {2, 3}, nn::InitKind::fan_in_uniform, 3);
    l.add("b", {2}, nn::InitKind::zeros, 1);
    return l;
}

Checkpoint sample_checkpoint() {
    const auto l = layout();
    Checkpoint c;
    c.kind = "net2d";
    c.config = {{"seed", "3"}, {"task", "sr"}};
    c.set_params(l, l.initialize(9));
    c.adam_m = std::vector<float>(8, 0.25f);
    c.adam_v = std::vector<float>(8, 0.5f);
    c.adam_step = 12;
    c.step = 12;
    c.rng_state = "1 2 3";
    return c;
}

}  // namespace

TEST_CASE("checkpoint encode and decode are inverse") {
    const Checkpoint c = sample_checkpoint();
    const auto bytes = encode_checkpoint(c);
    const Checkpoint d = decode_checkpoint(bytes);
    CHECK(d.kind == c.kind);
    CHECK(d.config == c.config);
    CHECK(d.tensors == c.tensors);
    CHECK(d.adam_m == c.adam_m);
    CHECK(d.adam_v == c.adam_v);
    CHECK(d.step == 12);
    CHECK(d.rng_state == c.rng_state);
    CHECK(encode_checkpoint(d) == bytes);
}

TEST_CASE("checkpoint parse errors") {
    auto bytes = encode_checkpoint(sample_checkpoint());
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad), ParseError);
    bad = bytes;
    bad.resize(bytes.size() - 3);
    CHECK_THROWS_AS(decode_checkpoint(bad), ParseError);
    bad = bytes;
    bad.push_back(1);
    CHECK_THROWS_AS(decode_checkpoint(bad), ParseError);
    bad = bytes;
    bad[4] = 9;  // version
    CHECK_THROWS_AS(decode_checkpoint(bad), ParseError);
}

TEST_CASE("checkpoint parameters must match the model layout") {
    const Checkpoint c = sample_checkpoint();
    CHECK(c.flat_params(layout()).size() == 8);
    nn::ParamLayout other;
    other.add("w", {2, 4}, nn::InitKind::fan_in_uniform, 4);
    other.add("b", {2}, nn::InitKind::zeros, 1);
    CHECK_THROWS_AS(c.flat_params(other), CheckpointError);
    CHECK_NOTHROW(c.require_config({{"task", "sr"}}));
    CHECK_THROWS_AS(c.require_config({{"task", "mt"}}), CheckpointError);
}

TEST_CASE("checkpoint files roundtrip") {
    const auto dir = std::filesystem::temp_directory_path() / "scorefusion_tests" / "ckpt";
    std::filesystem::create_directories(dir);
    const Checkpoint c = sample_checkpoint();
    save_checkpoint(c, dir / "c.sfck");
    CHECK(encode_checkpoint(load_checkpoint(dir / "c.sfck")) == encode_checkpoint(c));
}
