#include "ser/feature_io.hpp"

#include <cstring>
#include <fstream>

#include "ser/errors.hpp"

namespace ser {

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated SERF file: " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_feature_file(const std::filesystem::path& path, const FeatureMatrix& fm) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write("SERF", 4);
    put_u32(out, kSerfVersion);
    put_u32(out, fm.kind == FeatureKind::logmel ? 0u : 1u);
    put_u32(out, static_cast<std::uint32_t>(fm.frames));
    put_u32(out, static_cast<std::uint32_t>(fm.coeffs));
    for (double v : fm.values) {
        float f = static_cast<float>(v);
        static_assert(sizeof(float) == 4);
        out.write(reinterpret_cast<const char*>(&f), 4);
    }
    if (!out) throw IoError("write failed: " + path.string());
}

FeatureMatrix read_feature_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "SERF", 4) != 0) {
        throw ParseError("bad magic in " + path.string());
    }
    const std::uint32_t version = get_u32(in, "version");
    if (version != kSerfVersion) {
        throw ParseError("unsupported SERF version " + std::to_string(version));
    }
    const std::uint32_t kind = get_u32(in, "kind");
    if (kind > 1) throw ParseError("unknown feature kind tag " + std::to_string(kind));

    FeatureMatrix fm;
    fm.kind = kind == 0 ? FeatureKind::logmel : FeatureKind::mfcc;
    fm.frames = get_u32(in, "frames");
    fm.coeffs = get_u32(in, "coeffs");
    fm.frame_rate = 100.0;  // fixed by the 10 ms hop
    fm.values.resize(fm.frames * fm.coeffs);
    for (auto& v : fm.values) {
        float f;
        if (!in.read(reinterpret_cast<char*>(&f), 4)) {
            throw ParseError("truncated SERF payload in " + path.string());
        }
        v = f;
    }
    return fm;
}

void export_feature_csv(const std::filesystem::path& path, const FeatureMatrix& fm) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out.precision(9);
    for (std::size_t t = 0; t < fm.frames; ++t) {
        for (std::size_t c = 0; c < fm.coeffs; ++c) {
            if (c) out << ',';
            out << fm.at(t, c);
        }
        out << '\n';
    }
}

}  // namespace ser
