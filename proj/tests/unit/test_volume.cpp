// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest/doctest.h>

#include <cstring>
#include <filesystem>
#include <vector>

#include "scorefusion/errors.hpp"
#include "scorefusion/rng.hpp"
#include "scorefusion/volume.hpp"
#include "scorefusion/volume_io.hpp"

using namespace scorefusion;
namespace fs = std::filesystem;

namespace {

Volume ramp(Dims d) {
    Volume v(d);
    for (std::size_t n = 0; n < v.size(); ++n) v[n] = static_cast<float>(n);
    return v;
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& b, float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32(b, u);
}

fs::path temp_dir(const char* name) {
    const fs::path p = fs::temp_directory_path() / "scorefusion_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("volume index follows C order") {
    const Dims d{3, 4, 5};
    const Volume v = ramp(d);
    // Independent oracle: count voxels in row-major visiting order.
    std::size_t expected = 0;
    for (std::size_t i = 0; i < d.d1; ++i)
        for (std::size_t j = 0; j < d.d2; ++j)
            for (std::size_t k = 0; k < d.d3; ++k) CHECK(v(i, j, k) == static_cast<float>(expected++));
}

TEST_CASE("ingest constructor validates length, finiteness and range") {
    CHECK_THROWS_AS(Volume(Dims{2, 2, 2}, std::vector<float>(7, 0.f)), DimensionError);
    std::vector<float> bad(8, 0.f);
    bad[3] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS(Volume(Dims{2, 2, 2}, bad));
    CHECK_THROWS_AS(Volume(Dims{2, 2, 2}, std::vector<float>(8, 2.f), kMetricRange), RangeError);
    CHECK_NOTHROW(Volume(Dims{2, 2, 2}, std::vector<float>(8, 0.5f), kMetricRange));
}

TEST_CASE("slice extraction and reassembly are inverse along both axes") {
    const Volume v = ramp({4, 6, 8});
    for (SliceAxis a : {SliceAxis::axis1, SliceAxis::axis2}) {
        const SliceStack s = extract_slices(v, a);
        CHECK(reassemble(s) == v);
    }
    const SliceStack s1 = extract_slices(v, SliceAxis::axis1);
    REQUIRE(s1.count() == 6);
    CHECK(s1.slices[2].rows == 4);
    CHECK(s1.slices[2].cols == 8);
    CHECK(s1.slices[2](3, 5) == v(3, 2, 5));
    const SliceStack s2 = extract_slices(v, SliceAxis::axis2);
    REQUIRE(s2.count() == 8);
    CHECK(s2.slices[7](1, 4) == v(1, 4, 7));
}

TEST_CASE("center crop uses floor offsets") {
    const Volume v = ramp({9, 8, 10});
    const Volume c = center_crop(v, {8, 8, 8});
    CHECK(c.dims() == Dims{8, 8, 8});
    CHECK(c(0, 0, 0) == v(0, 0, 1));
    CHECK(c(7, 7, 7) == v(7, 7, 8));
    CHECK_THROWS(center_crop(v, {16, 8, 8}));
}

TEST_CASE("patch spec requires multiples of 8 inside the volume") {
    PatchSpec p{{0, 0, 0}, {8, 8, 8}};
    CHECK_NOTHROW(p.validate({16, 16, 16}));
    p.extent = {8, 12, 8};
    CHECK_THROWS(p.validate({16, 16, 16}));
    p.extent = {8, 8, 8};
    p.origin = {10, 0, 0};
    CHECK_THROWS(p.validate({16, 16, 16}));
}

TEST_CASE("normalize maps ranges affinely and round-trips") {
    Volume v(Dims{2, 2, 2}, std::vector<float>{0.f, 0.25f, 0.5f, 1.f, 0.f, 0.f, 0.75f, 1.f}, kMetricRange);
    const Volume m = normalize(v, kMetricRange, kModelRange);
    CHECK(m[0] == -1.f);
    CHECK(m[1] == -0.5f);
    CHECK(m[3] == 1.f);
    REQUIRE(m.value_range().has_value());
    CHECK(*m.value_range() == kModelRange);
    const Volume back = denormalize(m, kMetricRange, kModelRange);
    for (std::size_t n = 0; n < v.size(); ++n) CHECK(back[n] == doctest::Approx(v[n]).epsilon(1e-7));
}

TEST_CASE("SFV1 decoding of hand-built bytes") {
    std::vector<std::uint8_t> b{'S', 'F', 'V', '1'};
    put_u32(b, 1);
    put_u32(b, 2);
    put_u32(b, 2);
    const float vals[4] = {1.5f, -2.f, 0.f, 3.25f};
    for (float f : vals) put_f32(b, f);
    const Volume v = decode_sfv(b);
    CHECK(v.dims() == Dims{1, 2, 2});
    CHECK(v(0, 1, 1) == 3.25f);
    CHECK(v(0, 0, 1) == -2.f);
    CHECK(encode_sfv(v) == b);

    SUBCASE("bad magic") {
        auto c = b;
        c[3] = '2';
        try {
            decode_sfv(c);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.parse_kind() == ParseErrorKind::bad_magic);
        }
    }
    SUBCASE("truncated") {
        auto c = b;
        c.pop_back();
        try {
            decode_sfv(c);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.parse_kind() == ParseErrorKind::truncated);
        }
    }
    SUBCASE("trailing data") {
        auto c = b;
        c.push_back(0);
        try {
            decode_sfv(c);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.parse_kind() == ParseErrorKind::trailing_data);
        }
    }
    SUBCASE("non-finite voxel") {
        auto c = b;
        const std::size_t at = kSfvHeaderBytes;
        const float nan = std::numeric_limits<float>::quiet_NaN();
        std::memcpy(c.data() + at, &nan, 4);
        try {
            decode_sfv(c);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.parse_kind() == ParseErrorKind::non_finite);
        }
    }
    SUBCASE("dimension overflow") {
        std::vector<std::uint8_t> c{'S', 'F', 'V', '1'};
        put_u32(c, 0xFFFFFFFFu);
        put_u32(c, 0xFFFFFFFFu);
        put_u32(c, 4);
        try {
            decode_sfv(c);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.parse_kind() == ParseErrorKind::dim_overflow);
        }
    }
}

TEST_CASE("SFV1 file roundtrip is bytewise exact") {
    const fs::path dir = temp_dir("sfv");
    Rng rng(3);
    Volume v({8, 8, 8});
    for (auto& x : v.storage()) x = static_cast<float>(rng.normal());
    save_volume(v, dir / "v.sfv");
    const auto bytes = read_file(dir / "v.sfv");
    CHECK(bytes == encode_sfv(v));
    const Volume w = load_volume(dir / "v.sfv");
    CHECK(w == v);
    save_volume(w, dir / "w.sfv");
    CHECK(read_file(dir / "w.sfv") == bytes);
}

TEST_CASE("NIfTI roundtrip keeps voxels and header orientation") {
    const fs::path dir = temp_dir("nifti");
    NiftiImage img;
    img.volume = ramp({4, 3, 2});
    save_nifti(img, dir / "a.nii");
    NiftiImage back = load_nifti(dir / "a.nii");
    CHECK(back.volume == img.volume);
    CHECK(back.has_header);
    // Stamp a qform code into the header and make sure it survives.
    back.header[252] = 1;
    save_nifti(back, dir / "b.nii");
    const NiftiImage again = load_nifti(dir / "b.nii");
    CHECK(again.header[252] == 1);
    CHECK(again.volume == img.volume);
}
