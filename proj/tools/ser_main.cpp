// Command-line front end for the whole pipeline: corpus scanning, feature
// extraction, training, evaluation, prediction and the experiment grid.
// Exit codes: 0 success, 1 internal error, 2 user/config error.

#include <algorithm>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ser/classical.hpp"
#include "ser/dsp.hpp"
#include "ser/errors.hpp"
#include "ser/eval.hpp"
#include "ser/feature_io.hpp"
#include "ser/manifest.hpp"
#include "ser/nn/checkpoint.hpp"
#include "ser/nn/train.hpp"
#include "ser/pipeline.hpp"
#include "ser/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& data, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ser::IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ser::IoError("cannot write " + path.string());
    out << text;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::uint64_t default_seed() {
    if (const char* env = std::getenv("SER_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ser::ConfigError(std::string("SER_SEED is not an integer: ") + env);
        }
    }
    return 42;
}

ser::CorpusConvention convention_from_name(const std::string& name) {
    if (name == "ravdess") return ser::CorpusConvention::ravdess;
    if (name == "emodb") return ser::CorpusConvention::emodb;
    if (name == "manifest-csv") return ser::CorpusConvention::manifest_csv;
    throw ser::ConfigError("unknown convention '" + name + "'");
}

ser::DataSplit make_split(const ser::DatasetManifest& m, double ratio, std::uint64_t seed,
                          const std::string& mode) {
    if (mode == "random") return ser::split_stratified(m, ratio, seed);
    if (mode == "by-speaker") return ser::split_by_speaker(m, ratio, seed);
    throw ser::ConfigError("--split must be 'random' or 'by-speaker'");
}

// ---- scan ------------------------------------------------------------

struct ScanOpts {
    std::string root;
    std::string convention = "ravdess";
    std::string out;
};

int cmd_scan(const ScanOpts& opt) {
    auto manifest = ser::scan_corpus(opt.root, convention_from_name(opt.convention));
    ser::write_manifest_csv(opt.out, manifest);
    std::cout << "scanned " << manifest.size() << " entries, " << manifest.label_set.size()
              << " classes -> " << opt.out << "\n";
    return 0;
}

// ---- extract -----------------------------------------------------------

struct ExtractOpts {
    std::string manifest;
    std::string frontend = "mfcc";
    std::string out_dir;
    bool csv = false;
};

int cmd_extract(const ExtractOpts& opt) {
    auto manifest = ser::read_manifest_csv(opt.manifest);
    const fs::path base = fs::path(opt.manifest).parent_path();
    const ser::FeatureKind kind = ser::feature_kind_from_name(opt.frontend);
    fs::create_directories(opt.out_dir);

    const fs::path meta_path = fs::path(opt.out_dir) / "extract_meta.json";
    json meta = json::object();
    if (fs::exists(meta_path)) {
        try {
            meta = json::parse(read_text_file(meta_path));
        } catch (const json::exception&) {
            meta = json::object();  // stale meta is rebuilt
        }
    }

    std::size_t written = 0, skipped = 0, failed = 0;
    std::size_t unsaved = 0;
    auto save_meta = [&] {
        write_text_file(meta_path, meta.dump(2) + "\n");
        unsaved = 0;
    };
    std::map<std::string, std::size_t> stem_uses;  // CSV manifests may repeat stems
    for (const auto& entry : manifest.entries) {
        const fs::path in_path = ser::resolve_entry_path(base, entry.path);
        std::string stem = in_path.stem().string();
        const std::size_t use = stem_uses[stem]++;
        if (use > 0) stem += "_" + std::to_string(use);
        const fs::path out_path = fs::path(opt.out_dir) / (stem + ".serf");
        const std::string out_name = out_path.filename().string();
        try {
            const std::string bytes = read_text_file(in_path);
            const std::string hash = hex64(fnv1a(opt.frontend + "|" + bytes));
            if (fs::exists(out_path) && meta.contains(out_name) &&
                meta[out_name].value("hash", "") == hash) {
                ++skipped;
                continue;
            }
            ser::Waveform w = ser::resample_linear(
                ser::parse_wav({reinterpret_cast<const std::uint8_t*>(bytes.data()),
                                bytes.size()}),
                ser::kCanonicalRate);
            const ser::FeatureMatrix fm = ser::extract_features(w, kind);
            ser::write_feature_file(out_path, fm);
            if (opt.csv) {
                ser::export_feature_csv(fs::path(opt.out_dir) / (stem + ".csv"), fm);
            }
            meta[out_name] = {{"hash", hash}};
            if (++unsaved >= 64) save_meta();  // bounded loss on interruption
            ++written;
        } catch (const ser::Error& e) {
            std::cerr << "warning: " << in_path.string() << ": " << e.what() << "\n";
            ++failed;
        }
    }
    if (unsaved > 0) save_meta();
    std::cout << "extracted " << written << ", skipped " << skipped << ", failed " << failed
              << "\n";
    if (failed > 0 && written + skipped == 0) {
        std::cerr << "error: every file failed\n";
        return 2;
    }
    return 0;
}

// ---- train ------------------------------------------------------------

struct TrainOpts {
    std::string manifest;
    std::string arch;
    std::string out;
    std::string history;
    std::string split_mode = "random";
    double lr = 0.001;
    int epochs = 0;
    int batch = 8;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::uint64_t split_seed = 0;
    bool split_seed_given = false;
    double ratio = 0.8;
    int threads = 1;
    bool adapt_classes = false;
};

ser::nn::Dataset<float> build_dataset(const ser::DatasetManifest& m, const fs::path& base,
                                      const ser::nn::InputSpec& input) {
    ser::nn::Dataset<float> out;
    for (const auto& entry : m.entries) {
        ser::Waveform w = ser::load_canonical_wav(ser::resolve_entry_path(base, entry.path));
        out.inputs.push_back(ser::input_tensor_for(w, input));
        out.labels.push_back(m.class_index(entry.label));
    }
    return out;
}

int cmd_train(TrainOpts opt) {
    if (!opt.seed_given) opt.seed = default_seed();
    if (!opt.split_seed_given) opt.split_seed = opt.seed;

    auto manifest = ser::read_manifest_csv(opt.manifest);
    const fs::path base = fs::path(opt.manifest).parent_path();
    ser::nn::Arch arch = ser::nn::load_arch(opt.arch);

    const int k = static_cast<int>(manifest.label_set.size());
    if (arch.n_classes != k) {
        if (!opt.adapt_classes) {
            std::cerr << "error: arch expects " << arch.n_classes << " classes but the manifest has "
                      << k << " (pass --adapt-classes to rewrite the head)\n";
            return 2;
        }
        arch.n_classes = k;
        arch.layers[arch.layers.size() - 2].units = k;
    }

    auto split = make_split(manifest, opt.ratio, opt.split_seed, opt.split_mode);
    auto train_set = build_dataset(split.train, base, arch.input);
    auto test_set = build_dataset(split.test, base, arch.input);

    ser::nn::TrainConfig cfg;
    cfg.learning_rate = opt.lr;
    cfg.epochs = opt.epochs;
    cfg.batch_size = opt.batch;
    cfg.seed = opt.seed;
    cfg.threads = opt.threads;

    auto trained = ser::nn::train(arch, cfg, train_set, test_set);
    const double accuracy = ser::nn::evaluate_accuracy(trained.net, test_set, opt.threads);

    ser::nn::save_checkpoint(opt.out, trained.net, trained.adam, trained.rng, manifest.label_set);
    if (!opt.history.empty()) {
        json h;
        h["schema_version"] = 1;
        h["epochs"] = json::array();
        for (const auto& e : trained.history) {
            h["epochs"].push_back(
                {{"train_loss", e.train_loss}, {"valid_accuracy", e.valid_accuracy}});
        }
        write_text_file(opt.history, h.dump(2) + "\n");
    }
    std::printf("test_accuracy=%.10g\n", accuracy);
    return 0;
}

// ---- eval -------------------------------------------------------------

struct EvalOpts {
    std::string checkpoint;
    std::string manifest;
    std::string out_dir = ".";
    std::string split_mode = "random";
    std::uint64_t split_seed = 0;
    bool split_seed_given = false;
    double ratio = 0.8;
    int threads = 1;
};

std::string input_kind_name(const ser::nn::InputSpec& input) {
    switch (input.kind) {
        case ser::nn::InputSpec::Kind::raw: return "raw";
        case ser::nn::InputSpec::Kind::mfcc: return "mfcc";
        case ser::nn::InputSpec::Kind::logmel: return "logmel";
    }
    return "raw";
}

int cmd_eval(EvalOpts opt) {
    if (!opt.split_seed_given) opt.split_seed = default_seed();

    auto ckpt = ser::nn::load_checkpoint(opt.checkpoint);
    auto manifest = ser::read_manifest_csv(opt.manifest);
    const fs::path base = fs::path(opt.manifest).parent_path();

    if (!ckpt.label_set.empty() && ckpt.label_set != manifest.label_set) {
        auto names = [](const std::vector<int>& set) {
            std::string out;
            for (int id : set) out += std::string(ser::emotion_name(id)) + " ";
            return out;
        };
        std::cerr << "error: label sets differ; checkpoint: " << names(ckpt.label_set)
                  << "; manifest: " << names(manifest.label_set) << "\n";
        return 2;
    }

    auto split = make_split(manifest, opt.ratio, opt.split_seed, opt.split_mode);
    auto test_set = build_dataset(split.test, base, ckpt.net.arch().input);

    std::vector<int> preds;
    for (const auto& input : test_set.inputs) {
        preds.push_back(ser::nn::predict(ckpt.net, input, opt.threads).label);
    }

    ser::ExperimentResult result;
    result.dataset = fs::path(opt.manifest).stem().string();
    result.method = ckpt.net.arch().name;
    result.frontend = input_kind_name(ckpt.net.arch().input);
    for (int id : manifest.label_set) result.labels.emplace_back(ser::emotion_name(id));
    result.cm = ser::confusion(preds, test_set.labels, static_cast<int>(result.labels.size()));
    result.accuracy = ser::accuracy_overall(result.cm);
    for (std::size_t c = 0; c < result.labels.size(); ++c) {
        result.per_class.push_back({result.labels[c],
                                    ser::accuracy_per_class(result.cm, static_cast<int>(c)),
                                    result.cm.row_sum(c)});
    }
    result.seed = opt.split_seed;

    fs::create_directories(opt.out_dir);
    write_text_file(fs::path(opt.out_dir) / "result.json", ser::experiment_result_to_json(result));
    write_text_file(fs::path(opt.out_dir) / "confusion.csv", ser::confusion_csv(result));
    std::printf("test_accuracy=%.10g\n", result.accuracy);
    return 0;
}

// ---- predict ----------------------------------------------------------

struct PredictOpts {
    std::string checkpoint;
    std::string wav;
};

int cmd_predict(const PredictOpts& opt) {
    auto ckpt = ser::nn::load_checkpoint(opt.checkpoint);
    ser::Waveform w = ser::load_canonical_wav(opt.wav);
    auto input = ser::input_tensor_for(w, ckpt.net.arch().input);
    auto pred = ser::nn::predict(ckpt.net, input);

    std::string name = "class" + std::to_string(pred.label);
    if (static_cast<std::size_t>(pred.label) < ckpt.label_set.size()) {
        name = std::string(ser::emotion_name(ckpt.label_set[static_cast<std::size_t>(pred.label)]));
    }
    std::cout << "label=" << name << "\nprobabilities:";
    for (std::size_t k = 0; k < pred.probabilities.size(); ++k) {
        std::string kname = "class" + std::to_string(k);
        if (k < ckpt.label_set.size()) kname = std::string(ser::emotion_name(ckpt.label_set[k]));
        std::printf(" %s=%.4f", kname.c_str(), static_cast<double>(pred.probabilities[k]));
    }
    std::cout << "\n";
    return 0;
}

// ---- grid -------------------------------------------------------------

struct GridOpts {
    std::vector<std::string> datasets;  // name=manifest.csv
    std::string frontends = "mfcc,logmel,raw";
    std::string methods = "svm,rf,dt,nb,mv,stck,cnn,lstm,cnn-lstm";
    std::string configs_dir = "configs";
    std::string out_dir;
    std::string split_mode = "random";
    std::uint64_t seed = 0;
    bool seed_given = false;
    double ratio = 0.8;
    int epochs = 0;
    int threads = 1;
    bool timing = false;
};

int cmd_grid(GridOpts opt) {
    if (!opt.seed_given) opt.seed = default_seed();
    if (opt.datasets.empty()) throw ser::ConfigError("grid needs at least one --dataset name=csv");

    ser::GridConfig cfg;
    cfg.frontends = split_list(opt.frontends);
    cfg.methods = split_list(opt.methods);
    cfg.seed = opt.seed;
    cfg.ratio = opt.ratio;
    cfg.split_by_speaker = opt.split_mode == "by-speaker";
    cfg.epochs_override = opt.epochs;
    cfg.threads = opt.threads;
    cfg.record_timing = opt.timing;

    for (const auto& spec : opt.datasets) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
            throw ser::ConfigError("--dataset must be name=manifest.csv, got '" + spec + "'");
        }
        ser::GridDataset ds;
        ds.name = spec.substr(0, eq);
        const std::string manifest_path = spec.substr(eq + 1);
        ds.manifest = ser::read_manifest_csv(manifest_path);
        ds.base_dir = fs::path(manifest_path).parent_path();
        cfg.datasets.push_back(std::move(ds));
    }

    // Architecture configs are looked up as <method>_<frontend>.json with
    // hyphens mapped to underscores; missing files surface as cell failures.
    std::map<std::string, std::string> arch_texts;
    for (const auto& method : cfg.methods) {
        if (!ser::is_deep_method(method)) continue;
        for (const auto& frontend : cfg.frontends) {
            std::string fname = method + "_" + frontend + ".json";
            std::replace(fname.begin(), fname.end(), '-', '_');
            const fs::path path = fs::path(opt.configs_dir) / fname;
            if (!fs::exists(path)) continue;
            const std::string text = read_text_file(path);
            cfg.archs[method + "|" + frontend] = ser::nn::arch_from_json_text(text);
            arch_texts[method + "|" + frontend] = text;
        }
    }

    fs::create_directories(fs::path(opt.out_dir) / "cells");
    fs::create_directories(fs::path(opt.out_dir) / "tables");
    fs::create_directories(fs::path(opt.out_dir) / "confusion");

    auto cell_path = [&](const std::string& key) {
        std::string salt = key + "|" + std::to_string(opt.ratio) + "|" + opt.split_mode + "|" +
                           std::to_string(opt.epochs);
        const auto bar = key.find('|');
        const std::string rest = key.substr(bar + 1);
        const std::string mf = rest.substr(0, rest.rfind('|'));
        if (auto it = arch_texts.find(mf); it != arch_texts.end()) salt += "|" + it->second;
        return fs::path(opt.out_dir) / "cells" / (hex64(fnv1a(salt)) + ".json");
    };

    ser::GridHooks hooks;
    hooks.load = [&](const std::string& key, ser::ExperimentResult& out) {
        const fs::path path = cell_path(key);
        if (!fs::exists(path)) return false;
        try {
            out = ser::experiment_result_from_json(read_text_file(path));
            return true;
        } catch (const ser::Error&) {
            return false;  // corrupt cache entry is recomputed
        }
    };
    hooks.store = [&](const std::string& key, const ser::ExperimentResult& r) {
        write_text_file(cell_path(key), ser::experiment_result_to_json(r));
    };

    auto outcome = ser::run_experiment_grid(cfg, hooks);

    json failures = json::array();
    for (const auto& f : outcome.failures) {
        failures.push_back({{"dataset", f.dataset},
                            {"method", f.method},
                            {"frontend", f.frontend},
                            {"message", f.message}});
        std::cerr << "cell failed: " << f.dataset << "/" << f.method << "/" << f.frontend << ": "
                  << f.message << "\n";
    }
    write_text_file(fs::path(opt.out_dir) / "failures.json", failures.dump(2) + "\n");

    if (outcome.results.empty()) {
        std::cerr << "error: every grid cell failed\n";
        return 2;
    }
    auto report = ser::render_report(outcome.results);
    write_text_file(fs::path(opt.out_dir) / "results.json", report.json_text);
    write_text_file(fs::path(opt.out_dir) / "results.csv", report.csv_text);
    for (const auto& [name, table] : report.tables) {
        write_text_file(fs::path(opt.out_dir) / "tables" / (name + ".txt"), table);
    }
    for (const auto& r : outcome.results) {
        write_text_file(fs::path(opt.out_dir) / "confusion" /
                            (r.dataset + "_" + r.method + "_" + r.frontend + ".csv"),
                        ser::confusion_csv(r));
    }
    std::cout << "grid complete: " << outcome.results.size() << " cells, "
              << outcome.failures.size() << " failures -> " << opt.out_dir << "\n";
    return 0;
}

// ---- selftest ----------------------------------------------------------

std::vector<double> naive_dft_power(const std::vector<double>& frame, int n_fft) {
    std::vector<double> power(static_cast<std::size_t>(n_fft / 2 + 1));
    for (int k = 0; k <= n_fft / 2; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (int n = 0; n < static_cast<int>(frame.size()); ++n) {
            const double ang = -2.0 * 3.14159265358979323846 * k * n / n_fft;
            acc += frame[static_cast<std::size_t>(n)] *
                   std::complex<double>(std::cos(ang), std::sin(ang));
        }
        power[static_cast<std::size_t>(k)] = std::norm(acc);
    }
    return power;
}

ser::nn::Arch selftest_arch(const std::string& name, double seconds,
                            std::vector<ser::nn::LayerSpec> layers, int n_classes) {
    ser::nn::Arch arch;
    arch.name = name;
    arch.input.kind = ser::nn::InputSpec::Kind::raw;
    arch.input.seconds = seconds;
    arch.n_classes = n_classes;
    arch.layers = std::move(layers);
    return arch;
}

int cmd_selftest() {
    using ser::nn::LayerSpec;
    bool ok = true;
    auto report = [&](const std::string& name, bool pass, double value) {
        std::printf("selftest: %-28s %s (%.3g)\n", name.c_str(), pass ? "PASS" : "FAIL", value);
        ok = ok && pass;
    };

    // FFT power vs naive DFT
    {
        ser::Rng rng(11);
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            std::vector<double> frame(1024);
            for (auto& v : frame) v = rng.uniform(-1.0, 1.0);
            const auto fast = ser::power_spectrum(frame, 1024);
            const auto slow = naive_dft_power(frame, 1024);
            for (std::size_t k = 0; k < fast.size(); ++k) {
                const double rel = std::abs(fast[k] - slow[k]) / std::max(1.0, std::abs(slow[k]));
                worst = std::max(worst, rel);
            }
        }
        report("fft-vs-dft", worst < 1e-6, worst);
    }

    // DCT orthonormality
    {
        const int n = 64;
        double worst = 0.0;
        std::vector<std::vector<double>> basis;
        for (int i = 0; i < n; ++i) {
            std::vector<double> e(static_cast<std::size_t>(n), 0.0);
            e[static_cast<std::size_t>(i)] = 1.0;
            basis.push_back(ser::dct2_ortho(e, n));
        }
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                double dot = 0.0;
                for (int k = 0; k < n; ++k) {
                    dot += basis[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] *
                           basis[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
                }
                worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
            }
        }
        report("dct-orthonormality", worst < 1e-9, worst);
    }

    // Gradient checks, double precision
    {
        struct Case {
            const char* name;
            ser::nn::Arch arch;
            double tolerance;
        };
        const double s = 1.0 / 16000.0;
        std::vector<Case> cases;
        cases.push_back({"grad-dense",
                         selftest_arch("dense", 8 * s,
                                       {{.type = LayerSpec::Type::flatten},
                                        {.type = LayerSpec::Type::dense, .units = 16},
                                        {.type = LayerSpec::Type::dense, .units = 3},
                                        {.type = LayerSpec::Type::softmax}},
                                       3),
                         1e-6});
        cases.push_back({"grad-conv-relu",
                         selftest_arch("conv", 32 * s,
                                       {{.type = LayerSpec::Type::conv1d, .filters = 4, .kernel = 5,
                                         .stride = 2},
                                        {.type = LayerSpec::Type::relu},
                                        {.type = LayerSpec::Type::conv1d, .filters = 3, .kernel = 3},
                                        {.type = LayerSpec::Type::flatten},
                                        {.type = LayerSpec::Type::dense, .units = 3},
                                        {.type = LayerSpec::Type::softmax}},
                                       3),
                         1e-5});
        // relu between conv and batchnorm: a linear bias feeding BN has an
        // exactly-zero true gradient the relative metric cannot resolve
        cases.push_back({"grad-batchnorm",
                         selftest_arch("bn", 20 * s,
                                       {{.type = LayerSpec::Type::conv1d, .filters = 3, .kernel = 3},
                                        {.type = LayerSpec::Type::relu},
                                        {.type = LayerSpec::Type::batchnorm},
                                        {.type = LayerSpec::Type::flatten},
                                        {.type = LayerSpec::Type::dense, .units = 3},
                                        {.type = LayerSpec::Type::softmax}},
                                       3),
                         1e-5});
        cases.push_back({"grad-lstm",
                         selftest_arch("lstm", 6 * s,
                                       {{.type = LayerSpec::Type::lstm, .units = 5,
                                         .return_sequences = true},
                                        {.type = LayerSpec::Type::lstm, .units = 4},
                                        {.type = LayerSpec::Type::dense, .units = 3},
                                        {.type = LayerSpec::Type::softmax}},
                                       3),
                         1e-5});
        for (auto& c : cases) {
            ser::nn::Network<double> net(c.arch);
            net.init(7);
            const auto shape = net.input_shape();
            ser::nn::Tensor<double> batch({4, shape[0], shape[1]});
            ser::Rng rng(23);
            for (auto& v : batch.data) v = rng.normal();
            std::vector<int> labels = {0, 1, 2, 1};
            const double err = ser::nn::gradient_check(net, batch, labels, 5);
            report(c.name, err < c.tolerance, err);
        }
    }

    // Adam single step, closed form
    {
        ser::nn::Arch arch = selftest_arch("adam", 1.0 / 16000.0,
                                           {{.type = ser::nn::LayerSpec::Type::flatten},
                                            {.type = ser::nn::LayerSpec::Type::dense, .units = 2},
                                            {.type = ser::nn::LayerSpec::Type::softmax}},
                                           2);
        ser::nn::Network<double> net(arch);
        net.init(1);
        auto params = net.parameters();
        const double before = params[0].value->data[0];
        for (auto& p : net.parameters()) p.grad->fill(0.0);
        params[0].grad->data[0] = 1.0;
        auto adam = ser::nn::AdamState<double>::init_for(net);
        ser::nn::adam_step(net, adam, {0.001, 0.9, 0.999, 1e-8});
        const double delta = net.parameters()[0].value->data[0] - before;
        report("adam-single-step", std::abs(delta + 0.001) < 1e-9, delta);
    }

    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"speech emotion recognition pipeline"};
    app.require_subcommand(1);
    // TOML config; keys live under a [train] / [grid] section and lose to
    // explicit flags.
    app.set_config("--config", "", "TOML config file; explicit flags win");

    ScanOpts scan_opts;
    auto* scan = app.add_subcommand("scan", "build a manifest CSV from a corpus directory");
    scan->add_option("--root", scan_opts.root, "corpus root (or CSV for manifest-csv)")->required();
    scan->add_option("--convention", scan_opts.convention, "ravdess | emodb | manifest-csv")
        ->check(CLI::IsMember({"ravdess", "emodb", "manifest-csv"}));
    scan->add_option("--out", scan_opts.out, "output manifest CSV")->required();

    ExtractOpts extract_opts;
    auto* extract = app.add_subcommand("extract", "extract features to SERF files");
    extract->add_option("--manifest", extract_opts.manifest, "manifest CSV")->required();
    extract->add_option("--frontend", extract_opts.frontend, "mfcc | logmel")
        ->check(CLI::IsMember({"mfcc", "logmel"}));
    extract->add_option("--out-dir", extract_opts.out_dir, "output directory")->required();
    extract->add_flag("--csv", extract_opts.csv, "also export per-file CSV dumps");

    TrainOpts train_opts;
    auto* train = app.add_subcommand("train", "train a network from an arch config");
    train->fallthrough();  // lets --config appear after the subcommand
    train->add_option("--manifest", train_opts.manifest, "manifest CSV")->required();
    train->add_option("--arch", train_opts.arch, "architecture JSON")->required();
    train->add_option("--out", train_opts.out, "checkpoint output path")->required();
    train->add_option("--history", train_opts.history, "training history JSON path");
    train->add_option("--lr", train_opts.lr, "learning rate");
    train->add_option("--epochs", train_opts.epochs, "epochs (0 = per-architecture default)");
    train->add_option("--batch", train_opts.batch, "mini-batch size");
    train->add_option("--seed", train_opts.seed, "training seed (SER_SEED fallback)");
    train->add_option("--split-seed", train_opts.split_seed, "split seed (defaults to --seed)");
    train->add_option("--ratio", train_opts.ratio, "train fraction");
    train->add_option("--threads", train_opts.threads, "worker threads (1 = deterministic default)");
    train->add_option("--split", train_opts.split_mode, "random | by-speaker")
        ->check(CLI::IsMember({"random", "by-speaker"}));
    train->add_flag("--adapt-classes", train_opts.adapt_classes,
                    "rewrite the head when manifest classes differ from the arch");

    EvalOpts eval_opts;
    auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint on a manifest's test split");
    evalc->add_option("--checkpoint", eval_opts.checkpoint, "checkpoint file")->required();
    evalc->add_option("--manifest", eval_opts.manifest, "manifest CSV")->required();
    evalc->add_option("--out-dir", eval_opts.out_dir, "report directory");
    evalc->add_option("--split-seed", eval_opts.split_seed, "split seed (SER_SEED fallback)");
    evalc->add_option("--ratio", eval_opts.ratio, "train fraction");
    evalc->add_option("--split", eval_opts.split_mode, "random | by-speaker")
        ->check(CLI::IsMember({"random", "by-speaker"}));
    evalc->add_option("--threads", eval_opts.threads, "worker threads");

    PredictOpts predict_opts;
    auto* predict = app.add_subcommand("predict", "classify a single wav file");
    predict->add_option("--checkpoint", predict_opts.checkpoint, "checkpoint file")->required();
    predict->add_option("--wav", predict_opts.wav, "input wav")->required();

    GridOpts grid_opts;
    auto* grid = app.add_subcommand("grid", "run the full experiment grid");
    grid->fallthrough();
    grid->add_option("--dataset", grid_opts.datasets, "name=manifest.csv (repeatable)")
        ->required();
    grid->add_option("--frontends", grid_opts.frontends, "comma list of mfcc,logmel,raw");
    grid->add_option("--methods", grid_opts.methods, "comma list of methods");
    grid->add_option("--configs-dir", grid_opts.configs_dir, "directory of arch JSON configs");
    grid->add_option("--out-dir", grid_opts.out_dir, "report directory")->required();
    grid->add_option("--seed", grid_opts.seed, "grid seed (SER_SEED fallback)");
    grid->add_option("--ratio", grid_opts.ratio, "train fraction");
    grid->add_option("--split", grid_opts.split_mode, "random | by-speaker")
        ->check(CLI::IsMember({"random", "by-speaker"}));
    grid->add_option("--epochs", grid_opts.epochs, "epoch override for deep cells (0 = defaults)");
    grid->add_option("--threads", grid_opts.threads, "worker threads");
    grid->add_flag("--timing", grid_opts.timing,
                   "record wall times (off keeps reruns byte-identical)");

    auto* selftest = app.add_subcommand("selftest", "run gradient checks and DSP oracles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    train_opts.seed_given = train->count("--seed") > 0;
    train_opts.split_seed_given = train->count("--split-seed") > 0;
    eval_opts.split_seed_given = evalc->count("--split-seed") > 0;
    grid_opts.seed_given = grid->count("--seed") > 0;

    try {
        if (*scan) return cmd_scan(scan_opts);
        if (*extract) return cmd_extract(extract_opts);
        if (*train) return cmd_train(train_opts);
        if (*evalc) return cmd_eval(eval_opts);
        if (*predict) return cmd_predict(predict_opts);
        if (*grid) return cmd_grid(grid_opts);
        if (*selftest) return cmd_selftest();
    } catch (const ser::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
