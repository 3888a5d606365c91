#include <doctest.h>

#include <cstring>
#include <map>
#include <set>

#include "ser/errors.hpp"
#include "ser/manifest.hpp"
#include "ser/rng.hpp"
#include "ser/wav.hpp"
#include "testutil.hpp"

using namespace ser;

namespace {

// Hand-built wav bytes so the parser is not checked against its own encoder.
std::vector<std::uint8_t> build_wav(std::uint16_t format, std::uint16_t channels,
                                    std::uint32_t rate, std::uint16_t bits,
                                    const std::vector<std::uint8_t>& data) {
    std::vector<std::uint8_t> b;
    auto u16 = [&](std::uint16_t v) {
        b.push_back(v & 0xff);
        b.push_back(v >> 8);
    };
    auto u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
    };
    b.insert(b.end(), {'R', 'I', 'F', 'F'});
    u32(36 + static_cast<std::uint32_t>(data.size()));
    b.insert(b.end(), {'W', 'A', 'V', 'E'});
    b.insert(b.end(), {'f', 'm', 't', ' '});
    u32(16);
    u16(format);
    u16(channels);
    u32(rate);
    u32(rate * channels * bits / 8);
    u16(channels * bits / 8);
    u16(bits);
    b.insert(b.end(), {'d', 'a', 't', 'a'});
    u32(static_cast<std::uint32_t>(data.size()));
    b.insert(b.end(), data.begin(), data.end());
    return b;
}

std::vector<std::uint8_t> pcm16_bytes(const std::vector<std::int16_t>& samples) {
    std::vector<std::uint8_t> data;
    for (auto s : samples) {
        data.push_back(static_cast<std::uint16_t>(s) & 0xff);
        data.push_back(static_cast<std::uint16_t>(s) >> 8);
    }
    return data;
}

}  // namespace

TEST_CASE("parse_wav decodes an all-zero second of 16 kHz mono") {
    std::vector<std::int16_t> samples(16000, 0);
    auto w = parse_wav(build_wav(1, 1, 16000, 16, pcm16_bytes(samples)));
    CHECK(w.sample_rate == 16000);
    REQUIRE(w.samples.size() == 16000);
    for (float s : w.samples) CHECK(s == 0.0f);
}

TEST_CASE("parse_wav averages symmetric stereo to silence") {
    std::vector<std::int16_t> interleaved;
    for (int i = 0; i < 100; ++i) {
        interleaved.push_back(16384);   // +0.5
        interleaved.push_back(-16384);  // -0.5
    }
    auto w = parse_wav(build_wav(1, 2, 8000, 16, pcm16_bytes(interleaved)));
    REQUIRE(w.samples.size() == 100);
    for (float s : w.samples) CHECK(s == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("parse_wav reads float32 data exactly") {
    std::vector<std::uint8_t> data;
    for (float v : {0.25f, -0.75f, 1.0f}) {
        std::uint8_t raw[4];
        std::memcpy(raw, &v, 4);
        data.insert(data.end(), raw, raw + 4);
    }
    auto w = parse_wav(build_wav(3, 1, 44100, 32, data));
    REQUIRE(w.samples.size() == 3);
    CHECK(w.samples[0] == 0.25f);
    CHECK(w.samples[1] == -0.75f);
    CHECK(w.samples[2] == 1.0f);
}

TEST_CASE("parse_wav rejects malformed and unsupported input") {
    CHECK_THROWS_AS(parse_wav(std::vector<std::uint8_t>{'R', 'I', 'F', 'F'}), ParseError);
    std::vector<std::uint8_t> junk(64, 0x7f);
    CHECK_THROWS_AS(parse_wav(junk), ParseError);
    // 8-bit PCM and 4-channel layouts are valid WAV but outside scope
    CHECK_THROWS_AS(parse_wav(build_wav(1, 1, 8000, 8, {1, 2, 3, 4})), UnsupportedFormat);
    CHECK_THROWS_AS(parse_wav(build_wav(1, 4, 8000, 16, pcm16_bytes({0, 0, 0, 0}))),
                    UnsupportedFormat);
    // truncated data chunk
    auto bytes = build_wav(1, 1, 8000, 16, pcm16_bytes({1, 2}));
    bytes.resize(bytes.size() - 1);
    CHECK_THROWS_AS(parse_wav(bytes), ParseError);
}

TEST_CASE("synthetic 440 Hz sine survives a write/parse round trip") {
    testutil::TempDir tmp("wav");
    auto tone = testutil::make_tone(440.0, 1.0, 16000, 0.5);
    const auto path = tmp.path() / "tone.wav";
    save_wav_pcm16(path, tone);
    auto parsed = load_wav(path);
    REQUIRE(parsed.samples.size() == tone.samples.size());
    float peak = 0.0f;
    for (float s : parsed.samples) peak = std::max(peak, std::abs(s));
    CHECK(peak <= 0.5f + 1.0f / 32768.0f);
    CHECK(peak >= 0.5f - 1.0f / 32768.0f);
}

TEST_CASE("pcm16 round trip stays within one LSB") {
    Rng rng(7);
    Waveform w;
    w.sample_rate = 8000;
    for (int i = 0; i < 4096; ++i) w.samples.push_back(static_cast<float>(rng.uniform(-1.0, 1.0)));
    auto parsed = parse_wav(encode_wav_pcm16(w));
    REQUIRE(parsed.samples.size() == w.samples.size());
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
        CHECK(std::abs(parsed.samples[i] - w.samples[i]) <= 1.0f / 32768.0f);
    }
    // parsed PCM16 amplitudes are exact multiples of 1/32768, so a second
    // encode/parse generation reproduces them exactly
    auto second = parse_wav(encode_wav_pcm16(parsed));
    CHECK(second.samples == parsed.samples);
}

TEST_CASE("parse_wav survives arbitrary and mutated byte streams") {
    Rng rng(905);
    // pure garbage
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::uint8_t> junk(rng.bounded(200));
        for (auto& b : junk) b = static_cast<std::uint8_t>(rng.bounded(256));
        try {
            parse_wav(junk);
        } catch (const Error&) {
            // any library error is fine; crashes and foreign exceptions are not
        }
    }
    // single-byte mutations of a valid file
    const auto valid = build_wav(1, 1, 8000, 16, pcm16_bytes({100, -100, 3000, 12}));
    for (int trial = 0; trial < 500; ++trial) {
        auto bytes = valid;
        bytes[rng.bounded(bytes.size())] = static_cast<std::uint8_t>(rng.bounded(256));
        try {
            auto w = parse_wav(bytes);
            CHECK(!w.samples.empty());
        } catch (const Error&) {
        }
    }
    // random truncations
    for (std::size_t cut = 0; cut < valid.size(); ++cut) {
        std::vector<std::uint8_t> bytes(valid.begin(), valid.begin() + static_cast<long>(cut));
        try {
            parse_wav(bytes);
        } catch (const Error&) {
        }
    }
}

TEST_CASE("resample_linear identity and constants") {
    auto tone = testutil::make_tone(100.0, 0.1, 16000, 0.3);
    auto same = resample_linear(tone, 16000);
    CHECK(same.samples == tone.samples);

    Waveform constant;
    constant.sample_rate = 8000;
    constant.samples.assign(800, 0.42f);
    for (int target : {4000, 16000, 12345}) {
        auto out = resample_linear(constant, target);
        CHECK(out.sample_rate == target);
        CHECK(out.samples.size() ==
              static_cast<std::size_t>(std::llround(800.0 * target / 8000.0)));
        for (float s : out.samples) CHECK(s == doctest::Approx(0.42).epsilon(1e-6));
    }
}

TEST_CASE("resample_linear doubles an 8 kHz ramp with exact midpoints") {
    Waveform ramp;
    ramp.sample_rate = 8000;
    for (int i = 0; i < 8000; ++i) ramp.samples.push_back(static_cast<float>(i));
    auto out = resample_linear(ramp, 16000);
    REQUIRE(out.samples.size() == 16000);
    // brute-force interpolation oracle, checked exhaustively
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const double src = static_cast<double>(i) * 8000.0 / 16000.0;
        const std::size_t i0 = std::min<std::size_t>(static_cast<std::size_t>(src), 7999);
        const std::size_t i1 = std::min<std::size_t>(i0 + 1, 7999);
        const double frac = src - static_cast<double>(i0);
        const double expect = (1.0 - frac) * ramp.samples[i0] + frac * ramp.samples[i1];
        CHECK(out.samples[i] == doctest::Approx(expect).epsilon(1e-9));
    }
    CHECK(out.samples[101] == doctest::Approx((ramp.samples[50] + ramp.samples[51]) / 2.0));
}

TEST_CASE("scan_corpus parses RAVDESS file names") {
    testutil::TempDir tmp("ravdess");
    auto actor_dir = tmp.path() / "Actor_12";
    std::filesystem::create_directories(actor_dir);
    auto blip = testutil::make_tone(200.0, 0.01, 16000, 0.1);
    save_wav_pcm16(actor_dir / "03-01-05-01-01-01-12.wav", blip);
    save_wav_pcm16(actor_dir / "03-01-01-01-01-01-12.wav", blip);
    save_wav_pcm16(actor_dir / "03-01-02-01-02-01-12.wav", blip);

    auto m = scan_corpus(tmp.path(), CorpusConvention::ravdess);
    REQUIRE(m.size() == 3);
    std::map<std::string, ManifestEntry> by_name;
    for (const auto& e : m.entries) {
        by_name[std::filesystem::path(e.path).filename().string()] = e;
    }
    CHECK(emotion_name(by_name.at("03-01-05-01-01-01-12.wav").label) == "angry");
    CHECK(by_name.at("03-01-05-01-01-01-12.wav").speaker == "12");
    CHECK(emotion_name(by_name.at("03-01-01-01-01-01-12.wav").label) == "neutral");
    // calm (02) folds into bored
    CHECK(emotion_name(by_name.at("03-01-02-01-02-01-12.wav").label) == "bored");
    for (const auto& e : m.entries) {
        CHECK(std::find(m.label_set.begin(), m.label_set.end(), e.label) != m.label_set.end());
    }
}

TEST_CASE("scan_corpus parses EMO-DB file names") {
    testutil::TempDir tmp("emodb");
    auto blip = testutil::make_tone(200.0, 0.01, 16000, 0.1);
    save_wav_pcm16(tmp.path() / "03a01Fa.wav", blip);
    save_wav_pcm16(tmp.path() / "16b10Wb.wav", blip);
    auto m = scan_corpus(tmp.path(), CorpusConvention::emodb);
    REQUIRE(m.size() == 2);
    CHECK(emotion_name(m.entries[0].label) == "happy");
    CHECK(m.entries[0].speaker == "03");
    CHECK(emotion_name(m.entries[1].label) == "angry");
    CHECK(m.entries[1].speaker == "16");
}

TEST_CASE("scan_corpus handles a full-size RAVDESS layout") {
    testutil::TempDir tmp("ravdess_full");
    auto blip = testutil::make_tone(200.0, 0.004, 16000, 0.1);
    // 24 actors x (4 neutral + 8 each of the other 7 emotions) = 1440 files
    for (int actor = 1; actor <= 24; ++actor) {
        char dir_name[32];
        std::snprintf(dir_name, sizeof dir_name, "Actor_%02d", actor);
        const auto dir = tmp.path() / dir_name;
        std::filesystem::create_directories(dir);
        for (int emotion = 1; emotion <= 8; ++emotion) {
            const int max_intensity = emotion == 1 ? 1 : 2;
            for (int intensity = 1; intensity <= max_intensity; ++intensity) {
                for (int statement = 1; statement <= 2; ++statement) {
                    for (int rep = 1; rep <= 2; ++rep) {
                        char name[64];
                        std::snprintf(name, sizeof name, "03-01-%02d-%02d-%02d-%02d-%02d.wav",
                                      emotion, intensity, statement, rep, actor);
                        save_wav_pcm16(dir / name, blip);
                    }
                }
            }
        }
    }
    auto m = scan_corpus(tmp.path(), CorpusConvention::ravdess);
    CHECK(m.size() == 1440);
    CHECK(m.label_set.size() == 8);
    std::map<int, int> counts;
    for (const auto& e : m.entries) ++counts[e.label];
    CHECK(counts[*emotion_id("neutral")] == 96);
    CHECK(counts[*emotion_id("bored")] == 192);  // calm folded in
    CHECK(counts[*emotion_id("surprised")] == 192);
}

TEST_CASE("scan_corpus error paths") {
    testutil::TempDir tmp("scanbad");
    CHECK_THROWS_AS(scan_corpus(tmp.path(), CorpusConvention::ravdess), EmptyCorpus);

    auto blip = testutil::make_tone(200.0, 0.01, 16000, 0.1);
    save_wav_pcm16(tmp.path() / "03-01-99-01-01-01-07.wav", blip);
    try {
        scan_corpus(tmp.path(), CorpusConvention::ravdess);
        FAIL("expected LabelError");
    } catch (const LabelError& e) {
        CHECK(std::string(e.what()).find("03-01-99-01-01-01-07") != std::string::npos);
    }
}

TEST_CASE("manifest CSV round trip and validation") {
    testutil::TempDir tmp("csv");
    const auto path = tmp.path() / "m.csv";
    testutil::write_text(path, "path,label,speaker\na.wav,happy,s1\n");
    auto m = read_manifest_csv(path);
    REQUIRE(m.size() == 1);
    CHECK(m.entries[0].path == "a.wav");
    CHECK(emotion_name(m.entries[0].label) == "happy");
    CHECK(m.entries[0].speaker == "s1");

    const auto out = tmp.path() / "copy.csv";
    write_manifest_csv(out, m);
    auto again = read_manifest_csv(out);
    CHECK(again.entries == m.entries);

    testutil::write_text(path, "path,label\na.wav,happy\n");
    CHECK_THROWS_AS(read_manifest_csv(path), ParseError);
    testutil::write_text(path, "path,label,speaker\na.wav,joyful,s1\n");
    CHECK_THROWS_AS(read_manifest_csv(path), LabelError);
    testutil::write_text(path, "path,label,speaker\na.wav,happy,s1\na.wav,sad,s2\n");
    CHECK_THROWS_AS(read_manifest_csv(path), ParseError);
}

namespace {

DatasetManifest synthetic_manifest(const std::vector<std::pair<int, int>>& label_counts) {
    DatasetManifest m;
    int file_id = 0;
    for (auto [label, count] : label_counts) {
        for (int i = 0; i < count; ++i) {
            m.entries.push_back({"f" + std::to_string(file_id++) + ".wav", label,
                                 "spk" + std::to_string(file_id % 5)});
        }
        m.label_set.push_back(label);
    }
    std::sort(m.label_set.begin(), m.label_set.end());
    return m;
}

}  // namespace

TEST_CASE("split_stratified divides 10 per class as 8/2") {
    auto m = synthetic_manifest({{0, 10}, {1, 10}, {4, 10}});
    auto split = split_stratified(m, 0.8, 3);
    std::map<int, int> train_counts, test_counts;
    for (const auto& e : split.train.entries) ++train_counts[e.label];
    for (const auto& e : split.test.entries) ++test_counts[e.label];
    for (int label : {0, 1, 4}) {
        CHECK(train_counts[label] == 8);
        CHECK(test_counts[label] == 2);
    }
}

TEST_CASE("split_stratified is deterministic") {
    auto m = synthetic_manifest({{0, 13}, {2, 7}});
    auto a = split_stratified(m, 0.7, 99);
    auto b = split_stratified(m, 0.7, 99);
    CHECK(a.train.entries == b.train.entries);
    CHECK(a.test.entries == b.test.entries);
    auto c = split_stratified(m, 0.7, 100);
    CHECK(a.train.entries != c.train.entries);
}

TEST_CASE("split_stratified applies the ceiling rule to the anger class count") {
    // 127 anger samples at 80/20 -> ceil(101.6) = 102 train, 25 test
    auto m = synthetic_manifest({{2, 127}, {0, 79}});
    auto split = split_stratified(m, 0.8, 1);
    int train_anger = 0, test_anger = 0;
    for (const auto& e : split.train.entries) train_anger += e.label == 2;
    for (const auto& e : split.test.entries) test_anger += e.label == 2;
    CHECK(train_anger == 102);
    CHECK(test_anger == 25);
}

TEST_CASE("split_stratified rejects classes with fewer than 2 samples") {
    auto m = synthetic_manifest({{0, 5}, {1, 1}});
    CHECK_THROWS_AS(split_stratified(m, 0.8, 1), StratifyError);
    CHECK_THROWS_AS(split_stratified(m, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(split_stratified(m, 1.0, 1), ConfigError);
}

TEST_CASE("split_stratified partitions random manifests exactly") {
    Rng rng(424242);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::pair<int, int>> counts;
        const int n_classes = 2 + static_cast<int>(rng.bounded(6));
        for (int c = 0; c < n_classes; ++c) {
            counts.push_back({c, 2 + static_cast<int>(rng.bounded(40))});
        }
        auto m = synthetic_manifest(counts);
        const double ratio = rng.uniform(0.15, 0.9);
        auto split = split_stratified(m, ratio, rng.next_u64());

        CHECK(split.train.size() + split.test.size() == m.size());
        std::set<std::string> train_paths, test_paths;
        for (const auto& e : split.train.entries) train_paths.insert(e.path);
        for (const auto& e : split.test.entries) test_paths.insert(e.path);
        CHECK(train_paths.size() == split.train.size());
        for (const auto& p : test_paths) CHECK(train_paths.count(p) == 0);

        for (auto [label, count] : counts) {
            int test_count = 0;
            for (const auto& e : split.test.entries) test_count += e.label == label;
            const double expect = (1.0 - ratio) * count;
            CHECK(std::abs(test_count - expect) <= 1.0);
        }
    }
}

TEST_CASE("split_by_speaker keeps speakers disjoint") {
    DatasetManifest m;
    for (int s = 0; s < 6; ++s) {
        for (int i = 0; i < 10; ++i) {
            m.entries.push_back({"s" + std::to_string(s) + "_" + std::to_string(i) + ".wav",
                                 i % 2, "spk" + std::to_string(s)});
        }
    }
    m.label_set = {0, 1};
    auto split = split_by_speaker(m, 0.8, 5);
    std::set<std::string> train_speakers, test_speakers;
    for (const auto& e : split.train.entries) train_speakers.insert(e.speaker);
    for (const auto& e : split.test.entries) test_speakers.insert(e.speaker);
    CHECK(!train_speakers.empty());
    CHECK(!test_speakers.empty());
    for (const auto& s : test_speakers) CHECK(train_speakers.count(s) == 0);

    auto again = split_by_speaker(m, 0.8, 5);
    CHECK(again.train.entries == split.train.entries);
}
