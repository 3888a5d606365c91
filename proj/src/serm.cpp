#include "ser/serm.hpp"

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
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated SERM file: " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_serm(const std::filesystem::path& path, const nlohmann::json& header,
                const std::vector<std::vector<float>>& blobs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write("SERM", 4);
    put_u32(out, kSermVersion);
    const std::string text = header.dump();
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& blob : blobs) {
        put_u32(out, static_cast<std::uint32_t>(blob.size()));
        static_assert(sizeof(float) == 4);
        out.write(reinterpret_cast<const char*>(blob.data()),
                  static_cast<std::streamsize>(blob.size() * 4));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::pair<nlohmann::json, std::vector<std::vector<float>>> read_serm(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "SERM", 4) != 0) {
        throw ParseError("bad magic in " + path.string());
    }
    const std::uint32_t version = get_u32(in, "version");
    if (version != kSermVersion) {
        throw ParseError("unsupported SERM version " + std::to_string(version));
    }
    const std::uint32_t json_len = get_u32(in, "header length");
    std::string text(json_len, '\0');
    if (!in.read(text.data(), json_len)) throw ParseError("truncated SERM header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("SERM header is not valid JSON: ") + e.what());
    }

    std::vector<std::vector<float>> blobs;
    while (true) {
        unsigned char b[4];
        if (!in.read(reinterpret_cast<char*>(b), 4)) break;  // clean EOF
        const std::uint32_t count = static_cast<std::uint32_t>(b[0]) |
                                    (static_cast<std::uint32_t>(b[1]) << 8) |
                                    (static_cast<std::uint32_t>(b[2]) << 16) |
                                    (static_cast<std::uint32_t>(b[3]) << 24);
        std::vector<float> blob(count);
        if (!in.read(reinterpret_cast<char*>(blob.data()),
                     static_cast<std::streamsize>(count) * 4)) {
            throw ParseError("truncated SERM blob in " + path.string());
        }
        blobs.push_back(std::move(blob));
    }
    return {header, blobs};
}

}  // namespace ser
