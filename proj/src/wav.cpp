#include "ser/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "ser/errors.hpp"

namespace ser {

namespace {

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
           (static_cast<std::uint32_t>(b[off + 2]) << 16) |
           (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

void write_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void write_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatIeeeFloat = 3;

}  // namespace

Waveform parse_wav(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw ParseError("not a RIFF/WAVE stream");
    }

    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits = 0;
    bool have_fmt = false;
    std::span<const std::uint8_t> data;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint8_t* id = bytes.data() + pos;
        std::uint32_t size = read_u32(bytes, pos + 4);
        pos += 8;
        if (pos + size > bytes.size()) throw ParseError("chunk overruns file");
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (size < 16) throw ParseError("fmt chunk too small");
            format = read_u16(bytes, pos);
            channels = read_u16(bytes, pos + 2);
            sample_rate = read_u32(bytes, pos + 4);
            bits = read_u16(bytes, pos + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = bytes.subspan(pos, size);
        }
        pos += size + (size & 1);  // chunks are word-aligned
    }

    if (!have_fmt) throw ParseError("missing fmt chunk");
    if (data.empty()) throw ParseError("missing or empty data chunk");
    if (sample_rate == 0) throw ParseError("zero sample rate");
    if (channels != 1 && channels != 2) {
        throw UnsupportedFormat("unsupported channel count: " + std::to_string(channels));
    }
    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool float32 = format == kFormatIeeeFloat && bits == 32;
    if (!pcm16 && !float32) {
        throw UnsupportedFormat("unsupported codec: format=" + std::to_string(format) +
                                " bits=" + std::to_string(bits));
    }

    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t frame_size = bytes_per_sample * channels;
    const std::size_t n_frames = data.size() / frame_size;
    if (n_frames == 0) throw ParseError("data chunk holds no complete frame");

    Waveform w;
    w.sample_rate = static_cast<int>(sample_rate);
    w.samples.resize(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        float acc = 0.0f;
        for (std::uint16_t c = 0; c < channels; ++c) {
            const std::uint8_t* p = data.data() + i * frame_size + c * bytes_per_sample;
            if (pcm16) {
                std::int16_t v;
                std::memcpy(&v, p, 2);
                acc += static_cast<float>(v) / 32768.0f;
            } else {
                float v;
                std::memcpy(&v, p, 4);
                acc += v;
            }
        }
        w.samples[i] = acc / static_cast<float>(channels);
    }
    return w;
}

Waveform load_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
        return parse_wav(bytes);
    } catch (const Error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_wav_pcm16(const Waveform& w) {
    const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
    const std::uint32_t data_size = n * 2;
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_size);

    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    write_u32(out, 36 + data_size);
    out.insert(out.end(), {'W', 'A', 'V', 'E'});
    out.insert(out.end(), {'f', 'm', 't', ' '});
    write_u32(out, 16);
    write_u16(out, kFormatPcm);
    write_u16(out, 1);  // mono
    write_u32(out, static_cast<std::uint32_t>(w.sample_rate));
    write_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
    write_u16(out, 2);   // block align
    write_u16(out, 16);  // bits
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    write_u32(out, data_size);

    for (float s : w.samples) {
        long q = std::lround(static_cast<double>(s) * 32768.0);
        q = std::min(32767L, std::max(-32768L, q));
        write_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    return out;
}

void save_wav_pcm16(const std::filesystem::path& path, const Waveform& w) {
    auto bytes = encode_wav_pcm16(w);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

Waveform resample_linear(const Waveform& w, int target_rate) {
    if (target_rate <= 0) throw ConfigError("target rate must be positive");
    if (w.sample_rate == target_rate || w.samples.empty()) return w;

    const double ratio = static_cast<double>(w.sample_rate) / target_rate;
    const std::size_t out_len = static_cast<std::size_t>(
        std::llround(static_cast<double>(w.samples.size()) * target_rate / w.sample_rate));

    Waveform out;
    out.sample_rate = target_rate;
    out.samples.resize(out_len);
    const std::size_t last = w.samples.size() - 1;
    for (std::size_t i = 0; i < out_len; ++i) {
        double src = static_cast<double>(i) * ratio;
        std::size_t i0 = std::min(static_cast<std::size_t>(src), last);
        std::size_t i1 = std::min(i0 + 1, last);
        double frac = src - static_cast<double>(i0);
        out.samples[i] = static_cast<float>((1.0 - frac) * w.samples[i0] + frac * w.samples[i1]);
    }
    return out;
}

}  // namespace ser
