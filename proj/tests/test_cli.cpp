// Exercises the ser binary end to end through subprocess calls; SER_CLI_PATH
// is injected by the build.

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ser/feature_io.hpp"
#include "ser/manifest.hpp"
#include "ser/rng.hpp"
#include "ser/wav.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::string& args, const fs::path& scratch) {
    static int counter = 0;
    const fs::path out_file = scratch / ("out" + std::to_string(counter) + ".txt");
    const fs::path err_file = scratch / ("err" + std::to_string(counter) + ".txt");
    ++counter;
    const std::string cmd = std::string(SER_CLI_PATH) + " " + args + " >" + out_file.string() +
                            " 2>" + err_file.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Toy corpus: 2 classes x 6 clips of 0.05 s, RAVDESS-style names.
fs::path make_toy_corpus(const fs::path& root, ser::Rng& rng) {
    fs::create_directories(root);
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < 6; ++i) {
            const double freq = c == 0 ? 400.0 : 2800.0;
            auto tone = testutil::make_tone(freq, 0.05, 16000, 0.6, rng.uniform(0.0, 6.28));
            tone = testutil::add_noise(tone, 0.05, rng);
            char name[64];
            std::snprintf(name, sizeof name, "03-01-%02d-01-01-%02d-%02d.wav", c == 0 ? 1 : 5,
                          i + 1, (i % 3) + 1);
            ser::save_wav_pcm16(root / name, tone);
        }
    }
    return root;
}

const char* kTinyArch = R"({
  "schema_version": 1,
  "name": "tiny-cnn-raw",
  "input": {"kind": "raw", "seconds": 0.05},
  "n_classes": 2,
  "layers": [
    {"type": "conv1d", "filters": 4, "kernel": 5, "stride": 8},
    {"type": "relu"},
    {"type": "dropout", "rate": 0.1},
    {"type": "flatten"},
    {"type": "dense", "units": 8},
    {"type": "dense", "units": 2},
    {"type": "softmax"}
  ]
})";

}  // namespace

TEST_CASE("cli end-to-end workflow") {
    testutil::TempDir tmp("cli");
    const fs::path scratch = tmp.path();
    ser::Rng rng(4242);
    const fs::path corpus = make_toy_corpus(scratch / "corpus", rng);
    const fs::path manifest = scratch / "toy.csv";

    SUBCASE("scan builds a manifest from a RAVDESS tree") {
        auto r = run_cli("scan --root " + corpus.string() + " --convention ravdess --out " +
                             manifest.string(),
                         scratch);
        CHECK(r.code == 0);
        auto m = ser::read_manifest_csv(manifest);
        CHECK(m.size() == 12);
        CHECK(m.label_set.size() == 2);
    }

    SUBCASE("scan on an empty directory exits 2 naming EmptyCorpus") {
        fs::create_directories(scratch / "empty");
        auto r = run_cli("scan --root " + (scratch / "empty").string() +
                             " --convention ravdess --out " + (scratch / "x.csv").string(),
                         scratch);
        CHECK(r.code == 2);
        CHECK(r.err.find("EmptyCorpus") != std::string::npos);
    }

    SUBCASE("manifest-csv passthrough normalizes byte-identically") {
        run_cli("scan --root " + corpus.string() + " --convention ravdess --out " +
                    manifest.string(),
                scratch);
        const fs::path copy = scratch / "copy.csv";
        auto r = run_cli("scan --root " + manifest.string() +
                             " --convention manifest-csv --out " + copy.string(),
                         scratch);
        CHECK(r.code == 0);
        CHECK(read_file(copy) == read_file(manifest));
    }

    SUBCASE("extract emits 248x40 mfcc SERF files and skips on rerun") {
        run_cli("scan --root " + corpus.string() + " --convention ravdess --out " +
                    manifest.string(),
                scratch);
        const fs::path feat = scratch / "features";
        auto r = run_cli("extract --manifest " + manifest.string() + " --frontend mfcc --out-dir " +
                             feat.string(),
                         scratch);
        CHECK(r.code == 0);
        std::size_t count = 0;
        fs::path one;
        for (const auto& e : fs::directory_iterator(feat)) {
            if (e.path().extension() == ".serf") {
                ++count;
                one = e.path();
            }
        }
        CHECK(count == 12);
        auto fm = ser::read_feature_file(one);
        CHECK(fm.frames == 248);
        CHECK(fm.coeffs == 40);

        const auto mtime = fs::last_write_time(one);
        auto r2 = run_cli("extract --manifest " + manifest.string() +
                              " --frontend mfcc --out-dir " + feat.string(),
                          scratch);
        CHECK(r2.code == 0);
        CHECK(r2.out.find("skipped 12") != std::string::npos);
        CHECK(fs::last_write_time(one) == mtime);

        // an unreadable file warns but the run still succeeds
        auto broken = ser::read_manifest_csv(manifest);
        broken.entries.push_back({"missing.wav", 0, "sX"});
        const fs::path broken_csv = scratch / "broken.csv";
        ser::write_manifest_csv(broken_csv, broken);
        auto r3 = run_cli("extract --manifest " + broken_csv.string() +
                              " --frontend mfcc --out-dir " + feat.string(),
                          scratch);
        CHECK(r3.code == 0);
        CHECK(r3.err.find("warning") != std::string::npos);
        CHECK(r3.out.find("failed 1") != std::string::npos);

        // every file failing is an error
        const fs::path all_bad = scratch / "allbad.csv";
        testutil::write_text(all_bad, "path,label,speaker\nnope.wav,happy,s1\n");
        auto r4 = run_cli("extract --manifest " + all_bad.string() + " --frontend mfcc --out-dir " +
                              (scratch / "feat2").string(),
                          scratch);
        CHECK(r4.code == 2);
    }

    SUBCASE("extract logmel emits 598x128 SERF files") {
        run_cli("scan --root " + corpus.string() + " --convention ravdess --out " +
                    manifest.string(),
                scratch);
        const fs::path feat = scratch / "logmel";
        auto r = run_cli("extract --manifest " + manifest.string() +
                             " --frontend logmel --out-dir " + feat.string(),
                         scratch);
        CHECK(r.code == 0);
        for (const auto& e : fs::directory_iterator(feat)) {
            if (e.path().extension() != ".serf") continue;
            auto fm = ser::read_feature_file(e.path());
            CHECK(fm.frames == 598);
            CHECK(fm.coeffs == 128);
            break;
        }
    }

    SUBCASE("SER_SEED is the fallback seed") {
        run_cli("scan --root " + corpus.string() + " --convention ravdess --out " +
                    manifest.string(),
                scratch);
        const fs::path arch = scratch / "tiny.json";
        testutil::write_text(arch, kTinyArch);
        const fs::path env_ckpt = scratch / "env.serm";
        const fs::path flag_ckpt = scratch / "flag.serm";
        auto a = run_cli("train --manifest " + manifest.string() + " --arch " + arch.string() +
                             " --out " + flag_ckpt.string() + " --epochs 4 --seed 123",
                         scratch);
        CHECK(a.code == 0);
        const std::string env_cmd = "SER_SEED=123 " + std::string(SER_CLI_PATH) + " train" +
                                    " --manifest " + manifest.string() + " --arch " +
                                    arch.string() + " --out " + env_ckpt.string() +
                                    " --epochs 4 >/dev/null 2>&1";
        CHECK(std::system(env_cmd.c_str()) == 0);
        CHECK(read_file(env_ckpt) == read_file(flag_ckpt));
    }

    SUBCASE("train, eval and predict agree") {
        run_cli("scan --root " + corpus.string() + " --convention ravdess --out " +
                    manifest.string(),
                scratch);
        const fs::path arch = scratch / "tiny.json";
        testutil::write_text(arch, kTinyArch);
        const fs::path ckpt = scratch / "model.serm";
        const fs::path hist = scratch / "hist.json";

        auto r = run_cli("train --manifest " + manifest.string() + " --arch " + arch.string() +
                             " --out " + ckpt.string() + " --history " + hist.string() +
                             " --epochs 12 --seed 7",
                         scratch);
        CHECK(r.code == 0);
        REQUIRE(fs::exists(ckpt));
        CHECK(r.out.find("test_accuracy=") != std::string::npos);
        const std::string hist_text = read_file(hist);
        CHECK(std::count(hist_text.begin(), hist_text.end(), '{') >= 12);

        // identical seed, identical checkpoint bytes
        const fs::path ckpt2 = scratch / "model2.serm";
        run_cli("train --manifest " + manifest.string() + " --arch " + arch.string() + " --out " +
                    ckpt2.string() + " --epochs 12 --seed 7",
                scratch);
        CHECK(read_file(ckpt2) == read_file(ckpt));

        // eval reproduces the split from the seed and prints the same number
        auto ev = run_cli("eval --checkpoint " + ckpt.string() + " --manifest " +
                              manifest.string() + " --split-seed 7 --out-dir " +
                              (scratch / "report").string(),
                          scratch);
        CHECK(ev.code == 0);
        CHECK(ev.out == r.out.substr(r.out.find("test_accuracy=")));
        CHECK(fs::exists(scratch / "report" / "result.json"));
        CHECK(fs::exists(scratch / "report" / "confusion.csv"));

        auto missing = run_cli("eval --checkpoint " + (scratch / "nope.serm").string() +
                                   " --manifest " + manifest.string(),
                               scratch);
        CHECK(missing.code == 2);

        // label-set mismatch: same files relabeled happy/sad vs the
        // neutral/angry checkpoint
        const fs::path bad = scratch / "bad.csv";
        {
            auto m = ser::read_manifest_csv(manifest);
            std::string text = "path,label,speaker\n";
            text += m.entries[0].path + ",happy,s1\n";
            text += m.entries[1].path + ",happy,s2\n";
            text += m.entries[2].path + ",sad,s1\n";
            text += m.entries[3].path + ",sad,s2\n";
            testutil::write_text(bad, text);
        }
        auto mismatch = run_cli("eval --checkpoint " + ckpt.string() + " --manifest " +
                                    bad.string(),
                                scratch);
        CHECK(mismatch.code == 2);
        CHECK(mismatch.err.find("label sets differ") != std::string::npos);

        auto pr = run_cli("predict --checkpoint " + ckpt.string() + " --wav " +
                              (corpus / "03-01-01-01-01-01-01.wav").string(),
                          scratch);
        CHECK(pr.code == 0);
        CHECK(pr.out.find("label=") != std::string::npos);
    }

    SUBCASE("config file values lose to explicit flags") {
        run_cli("scan --root " + corpus.string() + " --convention ravdess --out " +
                    manifest.string(),
                scratch);
        const fs::path arch = scratch / "tiny.json";
        testutil::write_text(arch, kTinyArch);
        testutil::write_text(scratch / "train.toml", "[train]\nlr=0.5\nepochs=12\n");

        const fs::path with_config = scratch / "c1.serm";
        const fs::path flags_only = scratch / "c2.serm";
        auto a = run_cli("train --manifest " + manifest.string() + " --arch " + arch.string() +
                             " --out " + with_config.string() + " --config " +
                             (scratch / "train.toml").string() + " --lr 0.001 --seed 7",
                         scratch);
        CHECK(a.code == 0);
        auto b = run_cli("train --manifest " + manifest.string() + " --arch " + arch.string() +
                             " --out " + flags_only.string() + " --lr 0.001 --epochs 12 --seed 7",
                         scratch);
        CHECK(b.code == 0);
        CHECK(read_file(with_config) == read_file(flags_only));
    }

    SUBCASE("grid writes tables, resumes, and repeats byte-identically") {
        run_cli("scan --root " + corpus.string() + " --convention ravdess --out " +
                    manifest.string(),
                scratch);
        const fs::path configs = scratch / "configs";
        fs::create_directories(configs);
        std::string mfcc_arch = kTinyArch;
        // same stack on the mfcc input
        const std::string from = "\"input\": {\"kind\": \"raw\", \"seconds\": 0.05}";
        mfcc_arch.replace(mfcc_arch.find(from), from.size(), "\"input\": {\"kind\": \"mfcc\"}");
        testutil::write_text(configs / "cnn_mfcc.json", mfcc_arch);

        const fs::path out = scratch / "gridout";
        const std::string cmd = "grid --dataset toy=" + manifest.string() +
                                " --frontends mfcc --methods nb,dt,cnn --configs-dir " +
                                configs.string() + " --out-dir " + out.string() +
                                " --seed 3 --epochs 1";
        auto r = run_cli(cmd, scratch);
        CHECK(r.code == 0);
        CHECK(fs::exists(out / "results.json"));
        CHECK(fs::exists(out / "results.csv"));
        CHECK(fs::exists(out / "failures.json"));
        CHECK(fs::exists(out / "tables" / "mfcc-classical.txt"));
        CHECK(fs::exists(out / "tables" / "mfcc-deep.txt"));
        CHECK(fs::exists(out / "confusion" / "toy_nb_mfcc.csv"));

        // completed cells are reused on rerun
        fs::path cell;
        for (const auto& e : fs::directory_iterator(out / "cells")) cell = e.path();
        REQUIRE(!cell.empty());
        const auto cell_time = fs::last_write_time(cell);
        const std::string before = read_file(out / "results.json");
        auto r2 = run_cli(cmd, scratch);
        CHECK(r2.code == 0);
        CHECK(fs::last_write_time(cell) == cell_time);
        CHECK(read_file(out / "results.json") == before);

        // a fresh out-dir with the same seed reproduces the report bytes
        const fs::path out2 = scratch / "gridout2";
        const std::string cmd2 = "grid --dataset toy=" + manifest.string() +
                                 " --frontends mfcc --methods nb,dt,cnn --configs-dir " +
                                 configs.string() + " --out-dir " + out2.string() +
                                 " --seed 3 --epochs 1";
        auto r3 = run_cli(cmd2, scratch);
        CHECK(r3.code == 0);
        CHECK(read_file(out2 / "results.json") == before);

        // opting into timing fills wall_ms (and is the one thing that may
        // differ between reruns)
        const fs::path out3 = scratch / "gridout3";
        auto r4 = run_cli("grid --dataset toy=" + manifest.string() +
                              " --frontends mfcc --methods nb --configs-dir " + configs.string() +
                              " --out-dir " + out3.string() + " --seed 3 --timing",
                          scratch);
        CHECK(r4.code == 0);
        const std::string csv = read_file(out3 / "results.csv");
        CHECK(csv.find(",0.000\n") == std::string::npos);
    }

    SUBCASE("by-speaker split trains and evaluates consistently") {
        run_cli("scan --root " + corpus.string() + " --convention ravdess --out " +
                    manifest.string(),
                scratch);
        const fs::path arch = scratch / "tiny.json";
        testutil::write_text(arch, kTinyArch);
        const fs::path ckpt = scratch / "spk.serm";
        auto r = run_cli("train --manifest " + manifest.string() + " --arch " + arch.string() +
                             " --out " + ckpt.string() +
                             " --epochs 4 --seed 7 --split by-speaker",
                         scratch);
        CHECK(r.code == 0);
        auto ev = run_cli("eval --checkpoint " + ckpt.string() + " --manifest " +
                              manifest.string() + " --split-seed 7 --split by-speaker --out-dir " +
                              (scratch / "spkrep").string(),
                          scratch);
        CHECK(ev.code == 0);
        CHECK(ev.out == r.out.substr(r.out.find("test_accuracy=")));
    }

    SUBCASE("bad flags exit 2") {
        auto r = run_cli("train --no-such-flag", scratch);
        CHECK(r.code == 2);
        auto r2 = run_cli("scan --root /nonexistent --convention ravdess --out x.csv", scratch);
        CHECK(r2.code == 2);
    }
}

TEST_CASE("cli selftest passes") {
    testutil::TempDir tmp("selftest");
    auto r = run_cli("selftest", tmp.path());
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(r.out.find("PASS") != std::string::npos);
}
