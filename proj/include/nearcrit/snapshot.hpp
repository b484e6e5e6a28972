#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "nearcrit/ensemble.hpp"
#include "nearcrit/geometry.hpp"

namespace nearcrit {

// Label-field snapshot, bit-exact across platforms.
//
// Layout (little-endian):
//   offset  size  field
//   0       4     magic "NCPT"
//   4       4     u32 version (currently 1)
//   8       1     u8 lattice kind
//   9       1     u8 domain kind
//   10      2     u16 reserved (zero)
//   12      4     u32 n (mesh eta = 1/n)
//   16      4     u32 side_sites (2M/eta)
//   20      8     u64 seed
//   28      8     u64 carrier count
//   36      8*k   f64 labels in carrier-index order
inline constexpr std::uint32_t kSnapshotVersion = 1;
inline constexpr std::size_t kSnapshotHeaderSize = 36;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}
inline std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

}  // namespace detail

inline void save_snapshot(const LabelField& labels, const std::string& path) {
    const Geometry& g = labels.geometry();
    std::string header;
    header.reserve(kSnapshotHeaderSize);
    header += "NCPT";
    detail::put_u32(header, kSnapshotVersion);
    header.push_back(static_cast<char>(g.spec().kind));
    header.push_back(static_cast<char>(g.spec().domain));
    header.push_back(0);
    header.push_back(0);
    detail::put_u32(header, g.spec().n);
    detail::put_u32(header, g.spec().side_sites);
    detail::put_u64(header, labels.seed());
    detail::put_u64(header, labels.carrier_count());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open snapshot file for writing: " + path);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    std::string body;
    body.reserve(labels.carrier_count() * 8);
    for (double v : labels.values()) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        detail::put_u64(body, bits);
    }
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw IoError("short write on snapshot file: " + path);
}

// Loads a snapshot; the geometry is rebuilt from the header and must be kept
// alive by the caller (returned via out-parameter).
inline LabelField load_snapshot(const std::string& path, Geometry& geometry_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open snapshot file: " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < kSnapshotHeaderSize)
        throw IntegrityError("snapshot truncated before the header ends");
    const auto* p = reinterpret_cast<const unsigned char*>(data.data());
    if (std::memcmp(p, "NCPT", 4) != 0) throw FormatError("bad snapshot magic");
    std::uint32_t version = detail::get_u32(p + 4);
    if (version != kSnapshotVersion)
        throw FormatError("unsupported snapshot version " + std::to_string(version));
    std::uint8_t kind = p[8], domain = p[9];
    if (kind > 1 || domain > 1) throw FormatError("bad lattice/domain tag in snapshot");
    if (p[10] != 0 || p[11] != 0) throw FormatError("nonzero reserved bytes in snapshot");
    std::uint32_t n = detail::get_u32(p + 12);
    std::uint32_t side = detail::get_u32(p + 16);
    std::uint64_t seed = detail::get_u64(p + 20);
    std::uint64_t count = detail::get_u64(p + 28);
    if (n < 2 || side < 2) throw FormatError("bad lattice dimensions in snapshot");

    LatticeSpec spec;
    spec.kind = static_cast<LatticeKind>(kind);
    spec.domain = static_cast<DomainKind>(domain);
    spec.n = n;
    spec.side_sites = side;
    geometry_out = Geometry(spec);
    std::size_t expected = (spec.kind == LatticeKind::TriangularSite)
                               ? geometry_out.site_count()
                               : static_cast<std::size_t>(geometry_out.max_edge_id());
    if (count != expected)
        throw IntegrityError("snapshot carrier count does not match the lattice");
    if (data.size() != kSnapshotHeaderSize + 8 * count)
        throw IntegrityError("snapshot payload size mismatch");

    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits = detail::get_u64(p + kSnapshotHeaderSize + 8 * i);
        std::memcpy(&values[i], &bits, sizeof(double));
    }
    return LabelField(geometry_out, seed, std::move(values));
}

}  // namespace nearcrit
