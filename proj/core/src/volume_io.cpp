// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "scorefusion/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "scorefusion/errors.hpp"

namespace scorefusion {
namespace {

template <class T>
T byteswap_value(T v) {
    std::array<std::uint8_t, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    std::reverse(b.begin(), b.end());
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
}

template <class T>
T read_raw(const std::uint8_t* p, bool swap) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    if (swap) v = byteswap_value(v);
    return v;
}

template <class T>
void write_raw(std::uint8_t* p, T v, bool swap) {
    if (swap) v = byteswap_value(v);
    std::memcpy(p, &v, sizeof(T));
}

constexpr bool kHostLittle = std::endian::native == std::endian::little;

}  // namespace

std::vector<std::uint8_t> encode_sfv(const Volume& v) {
    const Dims& d = v.dims();
    for (std::size_t n : {d.d1, d.d2, d.d3}) {
        if (n > std::numeric_limits<std::uint32_t>::max()) throw DimensionError("dimension does not fit SFV1 u32 field");
    }
    std::vector<std::uint8_t> out(kSfvHeaderBytes + 4 * v.size());
    std::memcpy(out.data(), "SFV1", 4);
    write_raw<std::uint32_t>(out.data() + 4, static_cast<std::uint32_t>(d.d1), !kHostLittle);
    write_raw<std::uint32_t>(out.data() + 8, static_cast<std::uint32_t>(d.d2), !kHostLittle);
    write_raw<std::uint32_t>(out.data() + 12, static_cast<std::uint32_t>(d.d3), !kHostLittle);
    std::uint8_t* p = out.data() + kSfvHeaderBytes;
    for (float x : v.data()) {
        write_raw<float>(p, x, !kHostLittle);
        p += 4;
    }
    return out;
}

Volume decode_sfv(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "SFV1", 4) != 0) {
        throw ParseError(ParseErrorKind::bad_magic, "not an SFV1 file (bad magic)");
    }
    if (bytes.size() < kSfvHeaderBytes) {
        throw ParseError(ParseErrorKind::truncated, "SFV1 header truncated");
    }
    const std::uint64_t d1 = read_raw<std::uint32_t>(bytes.data() + 4, !kHostLittle);
    const std::uint64_t d2 = read_raw<std::uint32_t>(bytes.data() + 8, !kHostLittle);
    const std::uint64_t d3 = read_raw<std::uint32_t>(bytes.data() + 12, !kHostLittle);
    if (d1 == 0 || d2 == 0 || d3 == 0) {
        throw ParseError(ParseErrorKind::dim_overflow, "SFV1 dims must be positive");
    }
    // Each factor is < 2^32, so the two-step check cannot itself overflow.
    if (d1 * d2 > kMaxVoxels || d1 * d2 * d3 > kMaxVoxels) {
        throw ParseError(ParseErrorKind::dim_overflow, "SFV1 voxel count exceeds limit");
    }
    const std::uint64_t count = d1 * d2 * d3;
    const std::uint64_t need = kSfvHeaderBytes + 4 * count;
    if (bytes.size() < need) {
        throw ParseError(ParseErrorKind::truncated, "SFV1 payload truncated: have " + std::to_string(bytes.size()) +
                                                        " bytes, need " + std::to_string(need));
    }
    if (bytes.size() > need) {
        throw ParseError(ParseErrorKind::trailing_data, "SFV1 file has trailing bytes");
    }
    std::vector<float> data(count);
    const std::uint8_t* p = bytes.data() + kSfvHeaderBytes;
    for (std::uint64_t n = 0; n < count; ++n, p += 4) {
        data[n] = read_raw<float>(p, !kHostLittle);
        if (!std::isfinite(data[n])) {
            throw ParseError(ParseErrorKind::non_finite, "SFV1 voxel " + std::to_string(n) + " is not finite");
        }
    }
    return Volume(Dims{d1, d2, d3}, std::move(data));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::uint8_t> bytes(size);
    if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
        throw IoError("failed reading " + path.string());
    }
    return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError("failed writing " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void save_volume(const Volume& v, const std::filesystem::path& path) {
    write_file_atomic(path, encode_sfv(v));
}

Volume load_volume(const std::filesystem::path& path) {
    return decode_sfv(read_file(path));
}

// ---------------------------------------------------------------------------
// NIfTI-1

namespace {

constexpr std::size_t kNiftiHeader = 348;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffMagic = 344;

}  // namespace

NiftiImage load_nifti(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    if (bytes.size() < kNiftiHeader) throw ParseError(ParseErrorKind::truncated, "NIfTI header truncated");
    bool swap = false;
    std::int32_t sizeof_hdr = read_raw<std::int32_t>(bytes.data(), false);
    if (sizeof_hdr != 348) {
        swap = true;
        sizeof_hdr = read_raw<std::int32_t>(bytes.data(), true);
        if (sizeof_hdr != 348) throw ParseError(ParseErrorKind::bad_magic, "NIfTI sizeof_hdr is not 348");
    }
    if (std::memcmp(bytes.data() + kOffMagic, "n+1", 3) != 0) {
        throw ParseError(ParseErrorKind::bad_magic, "only single-file NIfTI-1 (n+1) is supported");
    }
    std::array<std::int16_t, 8> dim{};
    for (int n = 0; n < 8; ++n) dim[n] = read_raw<std::int16_t>(bytes.data() + kOffDim + 2 * n, swap);
    if (dim[0] < 1 || dim[0] > 7) throw ParseError(ParseErrorKind::dim_overflow, "NIfTI dim[0] out of range");
    for (int n = 4; n <= dim[0]; ++n) {
        if (dim[n] > 1) throw ParseError(ParseErrorKind::unsupported, "only single 3D NIfTI images are supported");
    }
    const std::size_t nx = dim[1] > 0 ? static_cast<std::size_t>(dim[1]) : 0;
    const std::size_t ny = dim[0] >= 2 ? static_cast<std::size_t>(std::max<std::int16_t>(dim[2], 0)) : 1;
    const std::size_t nz = dim[0] >= 3 ? static_cast<std::size_t>(std::max<std::int16_t>(dim[3], 0)) : 1;
    if (nx == 0 || ny == 0 || nz == 0) throw ParseError(ParseErrorKind::dim_overflow, "NIfTI dims must be positive");

    const std::int16_t datatype = read_raw<std::int16_t>(bytes.data() + kOffDatatype, swap);
    std::size_t bpv = 0;
    switch (datatype) {
        case 2: bpv = 1; break;   // uint8
        case 4: bpv = 2; break;   // int16
        case 8: bpv = 4; break;   // int32
        case 16: bpv = 4; break;  // float32
        case 64: bpv = 8; break;  // float64
        default: throw ParseError(ParseErrorKind::unsupported, "unsupported NIfTI datatype " + std::to_string(datatype));
    }
    const float vox_offset_f = read_raw<float>(bytes.data() + kOffVoxOffset, swap);
    const auto vox_offset = static_cast<std::size_t>(std::max(352.0f, vox_offset_f));
    const std::size_t count = nx * ny * nz;
    if (bytes.size() < vox_offset + count * bpv) throw ParseError(ParseErrorKind::truncated, "NIfTI payload truncated");

    float slope = read_raw<float>(bytes.data() + kOffSclSlope, swap);
    float inter = read_raw<float>(bytes.data() + kOffSclInter, swap);
    const bool scale = std::isfinite(slope) && slope != 0.f && !(slope == 1.f && inter == 0.f);
    if (!std::isfinite(inter)) inter = 0.f;

    Volume v(Dims{nx, ny, nz});
    const std::uint8_t* payload = bytes.data() + vox_offset;
    // NIfTI stores x fastest; the volume stores its last axis fastest.
    for (std::size_t z = 0; z < nz; ++z)
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t x = 0; x < nx; ++x) {
                const std::uint8_t* p = payload + ((z * ny + y) * nx + x) * bpv;
                double val = 0;
                switch (datatype) {
                    case 2: val = *p; break;
                    case 4: val = read_raw<std::int16_t>(p, swap); break;
                    case 8: val = read_raw<std::int32_t>(p, swap); break;
                    case 16: val = read_raw<float>(p, swap); break;
                    case 64: val = read_raw<double>(p, swap); break;
                }
                if (scale) val = val * slope + inter;
                const auto f = static_cast<float>(val);
                if (!std::isfinite(f)) throw ParseError(ParseErrorKind::non_finite, "NIfTI voxel is not finite");
                v(x, y, z) = f;
            }

    NiftiImage img;
    img.volume = std::move(v);
    std::memcpy(img.header.data(), bytes.data(), kNiftiHeader);
    if (swap) {
        // Stored headers are kept in host order so save_nifti can patch them uniformly.
        auto swap_at = [&](std::size_t off, std::size_t width, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) std::reverse(img.header.begin() + off + i * width,
                                                             img.header.begin() + off + (i + 1) * width);
        };
        swap_at(0, 4, 1);     // sizeof_hdr
        swap_at(32, 4, 1);    // extents
        swap_at(36, 2, 1);    // session_error
        swap_at(40, 2, 8);    // dim
        swap_at(56, 4, 3);    // intent_p1..p3
        swap_at(68, 2, 1);    // intent_code
        swap_at(70, 2, 1);    // datatype
        swap_at(72, 2, 1);    // bitpix
        swap_at(74, 2, 1);    // slice_start
        swap_at(76, 4, 8);    // pixdim
        swap_at(108, 4, 3);   // vox_offset, scl_slope, scl_inter
        swap_at(120, 2, 1);   // slice_end
        swap_at(124, 4, 4);   // cal_max, cal_min, slice_duration, toffset
        swap_at(140, 4, 2);   // glmax, glmin
        swap_at(252, 2, 2);   // qform_code, sform_code
        swap_at(256, 4, 18);  // quatern_b..d, qoffset_x..z, srow_x/y/z
    }
    img.has_header = true;
    return img;
}

void save_nifti(const NiftiImage& img, const std::filesystem::path& path) {
    const Volume& v = img.volume;
    const Dims& d = v.dims();
    for (std::size_t n : {d.d1, d.d2, d.d3}) {
        if (n > 32767) throw DimensionError("dimension does not fit NIfTI int16 field");
    }
    constexpr std::size_t kVoxOffset = 352;
    std::vector<std::uint8_t> out(kVoxOffset + 4 * v.size(), 0);
    const bool swap = !kHostLittle;
    if (img.has_header) {
        std::memcpy(out.data(), img.header.data(), kNiftiHeader);
    } else {
        write_raw<std::int32_t>(out.data(), 348, swap);
        // Unit pixdim, qform/sform unset.
        for (int n = 0; n < 8; ++n) write_raw<float>(out.data() + 76 + 4 * n, 1.f, swap);
    }
    std::array<std::int16_t, 8> dim{3, static_cast<std::int16_t>(d.d1), static_cast<std::int16_t>(d.d2),
                                    static_cast<std::int16_t>(d.d3), 1, 1, 1, 1};
    for (int n = 0; n < 8; ++n) write_raw<std::int16_t>(out.data() + kOffDim + 2 * n, dim[n], swap);
    write_raw<std::int16_t>(out.data() + kOffDatatype, 16, swap);
    write_raw<std::int16_t>(out.data() + kOffBitpix, 32, swap);
    write_raw<float>(out.data() + kOffVoxOffset, static_cast<float>(kVoxOffset), swap);
    write_raw<float>(out.data() + kOffSclSlope, 1.f, swap);
    write_raw<float>(out.data() + kOffSclInter, 0.f, swap);
    std::memcpy(out.data() + kOffMagic, "n+1\0", 4);
    std::uint8_t* payload = out.data() + kVoxOffset;
    for (std::size_t z = 0; z < d.d3; ++z)
        for (std::size_t y = 0; y < d.d2; ++y)
            for (std::size_t x = 0; x < d.d1; ++x) {
                write_raw<float>(payload + ((z * d.d2 + y) * d.d1 + x) * 4, v(x, y, z), swap);
            }
    write_file_atomic(path, out);
}

}  // namespace scorefusion
