#include "ser/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <set>

#include <json.hpp>

#include "ser/classical.hpp"
#include "ser/errors.hpp"
#include "ser/nn/train.hpp"
#include "ser/pipeline.hpp"

using nlohmann::json;

namespace ser {

std::size_t ConfusionMatrix::total() const {
    std::size_t acc = 0;
    for (const auto& row : counts) {
        for (auto v : row) acc += v;
    }
    return acc;
}

std::size_t ConfusionMatrix::trace() const {
    std::size_t acc = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) acc += counts[i][i];
    return acc;
}

std::size_t ConfusionMatrix::row_sum(std::size_t r) const {
    std::size_t acc = 0;
    for (auto v : counts[r]) acc += v;
    return acc;
}

std::size_t ConfusionMatrix::col_sum(std::size_t c) const {
    std::size_t acc = 0;
    for (const auto& row : counts) acc += row[c];
    return acc;
}

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& truths, int k) {
    if (preds.size() != truths.size()) {
        throw EvalError("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                        std::to_string(truths.size()) + " truths");
    }
    if (k < 1) throw EvalError("confusion: k must be >= 1");
    ConfusionMatrix cm;
    cm.counts.assign(static_cast<std::size_t>(k),
                     std::vector<std::size_t>(static_cast<std::size_t>(k), 0));
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (truths[i] < 0 || truths[i] >= k || preds[i] < 0 || preds[i] >= k) {
            throw EvalError("confusion: label outside [0, K) at index " + std::to_string(i));
        }
        ++cm.counts[static_cast<std::size_t>(truths[i])][static_cast<std::size_t>(preds[i])];
    }
    return cm;
}

double accuracy_overall(const ConfusionMatrix& cm) {
    const std::size_t total = cm.total();
    if (total == 0) throw EvalError("accuracy of an empty confusion matrix");
    return 100.0 * static_cast<double>(cm.trace()) / static_cast<double>(total);
}

double accuracy_per_class(const ConfusionMatrix& cm, int c) {
    const std::size_t total = cm.total();
    if (total == 0) throw EvalError("accuracy of an empty confusion matrix");
    const std::size_t ci = static_cast<std::size_t>(c);
    const std::size_t tp = cm.counts[ci][ci];
    const std::size_t fn = cm.row_sum(ci) - tp;
    const std::size_t fp = cm.col_sum(ci) - tp;
    const std::size_t tn = total - tp - fn - fp;
    return 100.0 * static_cast<double>(tp + tn) / static_cast<double>(total);
}

namespace {

json result_to_json_obj(const ExperimentResult& r) {
    json j;
    j["dataset"] = r.dataset;
    j["method"] = r.method;
    j["frontend"] = r.frontend;
    j["accuracy"] = r.accuracy;
    j["labels"] = r.labels;
    json pc = json::array();
    for (const auto& c : r.per_class) {
        pc.push_back({{"label", c.label}, {"accuracy", c.accuracy}, {"support", c.support}});
    }
    j["per_class"] = pc;
    j["confusion"] = r.cm.counts;
    j["wall_ms"] = r.wall_ms;
    j["seed"] = r.seed;
    return j;
}

ExperimentResult result_from_json_obj(const json& j) {
    ExperimentResult r;
    r.dataset = j.at("dataset").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.frontend = j.at("frontend").get<std::string>();
    r.accuracy = j.at("accuracy").get<double>();
    r.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& jc : j.at("per_class")) {
        r.per_class.push_back({jc.at("label").get<std::string>(),
                               jc.at("accuracy").get<double>(),
                               jc.at("support").get<std::size_t>()});
    }
    r.cm.counts = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
    r.wall_ms = j.at("wall_ms").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
}

std::string format_pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

const std::vector<std::string>& classical_method_order() {
    static const std::vector<std::string> order = {"svm", "rf", "dt", "nb", "knn", "mv", "stck"};
    return order;
}

const std::vector<std::string>& deep_method_order() {
    static const std::vector<std::string> order = {"cnn", "lstm", "cnn-lstm"};
    return order;
}

}  // namespace

bool is_deep_method(const std::string& method) {
    const auto& order = deep_method_order();
    return std::find(order.begin(), order.end(), method) != order.end();
}

std::string experiment_result_to_json(const ExperimentResult& r) {
    return result_to_json_obj(r).dump(2) + "\n";
}

ExperimentResult experiment_result_from_json(const std::string& text) {
    try {
        return result_from_json_obj(json::parse(text));
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad experiment result JSON: ") + e.what());
    }
}

std::string confusion_csv(const ExperimentResult& r) {
    std::string out = "true\\pred";
    for (const auto& name : r.labels) out += "," + name;
    out += "\n";
    for (std::size_t t = 0; t < r.cm.k(); ++t) {
        out += r.labels[t];
        for (std::size_t p = 0; p < r.cm.k(); ++p) {
            out += "," + std::to_string(r.cm.counts[t][p]);
        }
        out += "\n";
    }
    return out;
}

ReportFiles render_report(const std::vector<ExperimentResult>& results) {
    if (results.empty()) throw EvalError("render_report: no results");

    ReportFiles out;
    json root;
    root["schema_version"] = 1;
    json arr = json::array();
    for (const auto& r : results) arr.push_back(result_to_json_obj(r));
    root["results"] = arr;
    out.json_text = root.dump(2) + "\n";

    out.csv_text = "dataset,method,frontend,accuracy,seed,wall_ms\n";
    for (const auto& r : results) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.4f", r.accuracy);
        out.csv_text += r.dataset + "," + r.method + "," + r.frontend + "," + buf + "," +
                        std::to_string(r.seed) + ",";
        std::snprintf(buf, sizeof buf, "%.3f", r.wall_ms);
        out.csv_text += std::string(buf) + "\n";
    }

    // Group into per-(frontend, family) tables shaped like the published
    // ones: datasets as rows, methods as columns, best per row starred.
    std::vector<std::string> dataset_order;
    for (const auto& r : results) {
        if (std::find(dataset_order.begin(), dataset_order.end(), r.dataset) ==
            dataset_order.end()) {
            dataset_order.push_back(r.dataset);
        }
    }
    for (const std::string frontend : {"mfcc", "logmel", "raw"}) {
        for (const bool deep : {false, true}) {
            const auto& order = deep ? deep_method_order() : classical_method_order();
            std::vector<std::string> methods;
            for (const auto& m : order) {
                for (const auto& r : results) {
                    if (r.frontend == frontend && r.method == m) {
                        methods.push_back(m);
                        break;
                    }
                }
            }
            if (methods.empty()) continue;

            std::size_t col = 9;
            for (const auto& d : dataset_order) col = std::max(col, d.size() + 2);
            auto pad = [col](std::string s) {
                while (s.size() < col) s += ' ';
                return s;
            };

            std::string table = pad("DATASET");
            for (const auto& m : methods) {
                std::string h = m;
                std::transform(h.begin(), h.end(), h.begin(),
                               [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
                table += pad(h);
            }
            table += "\n";

            for (const auto& d : dataset_order) {
                std::vector<const ExperimentResult*> row(methods.size(), nullptr);
                double best = -1.0;
                bool any = false;
                for (std::size_t m = 0; m < methods.size(); ++m) {
                    for (const auto& r : results) {
                        if (r.dataset == d && r.frontend == frontend && r.method == methods[m]) {
                            row[m] = &r;
                            best = std::max(best, r.accuracy);
                            any = true;
                        }
                    }
                }
                if (!any) continue;
                table += pad(d);
                for (const auto* r : row) {
                    if (!r) {
                        table += pad("-");
                    } else {
                        std::string cell = format_pct(r->accuracy);
                        if (r->accuracy == best) cell += "*";
                        table += pad(cell);
                    }
                }
                table += "\n";
            }
            out.tables[std::string(frontend) + "-" + (deep ? "deep" : "classical")] = table;
        }
    }
    return out;
}

// ---- grid -----------------------------------------------------------------

namespace {

struct PreparedSplit {
    DataSplit split;
    std::vector<Waveform> train_waves;
    std::vector<Waveform> test_waves;
    std::vector<int> train_classes;  // label_set indices
    std::vector<int> test_classes;
    std::vector<std::string> label_names;
};

PreparedSplit prepare_dataset(const GridDataset& ds, double ratio, std::uint64_t seed,
                              bool by_speaker) {
    PreparedSplit prep;
    prep.split = by_speaker ? split_by_speaker(ds.manifest, ratio, seed)
                            : split_stratified(ds.manifest, ratio, seed);
    for (int label : ds.manifest.label_set) {
        prep.label_names.emplace_back(emotion_name(label));
    }
    for (const auto& e : prep.split.train.entries) {
        prep.train_waves.push_back(load_canonical_wav(resolve_entry_path(ds.base_dir, e.path)));
        prep.train_classes.push_back(prep.split.train.class_index(e.label));
    }
    for (const auto& e : prep.split.test.entries) {
        prep.test_waves.push_back(load_canonical_wav(resolve_entry_path(ds.base_dir, e.path)));
        prep.test_classes.push_back(prep.split.test.class_index(e.label));
    }
    return prep;
}

std::vector<ClassifierSpec> committee_specs() {
    ClassifierSpec svm{.kind = "svm"};
    ClassifierSpec rf{.kind = "rf"};
    ClassifierSpec dt{.kind = "dt"};
    ClassifierSpec nb{.kind = "nb"};
    return {svm, rf, dt, nb};
}

ExperimentResult make_result(const std::string& dataset, const std::string& method,
                             const std::string& frontend, const std::vector<int>& preds,
                             const std::vector<int>& truths, const PreparedSplit& prep,
                             std::uint64_t seed) {
    ExperimentResult r;
    r.dataset = dataset;
    r.method = method;
    r.frontend = frontend;
    r.labels = prep.label_names;
    r.cm = confusion(preds, truths, static_cast<int>(prep.label_names.size()));
    r.accuracy = accuracy_overall(r.cm);
    for (std::size_t c = 0; c < prep.label_names.size(); ++c) {
        r.per_class.push_back({prep.label_names[c], accuracy_per_class(r.cm, static_cast<int>(c)),
                               r.cm.row_sum(c)});
    }
    r.seed = seed;
    return r;
}

ExperimentResult run_classical_cell(const std::string& dataset, const std::string& method,
                                    const std::string& frontend, const LabeledVectors& train,
                                    const LabeledVectors& test, const PreparedSplit& prep,
                                    std::uint64_t seed) {
    std::unique_ptr<Classifier> model;
    if (method == "mv") {
        model = std::make_unique<VotingEnsemble>(VotingEnsemble::fit(train, committee_specs(),
                                                                     seed));
    } else if (method == "stck") {
        model = std::make_unique<StackingEnsemble>(
            StackingEnsemble::fit(train, committee_specs(), 5, seed));
    } else {
        ClassifierSpec spec;
        spec.kind = method;
        model = fit_classifier(spec, train, seed);
    }
    std::vector<int> preds;
    for (const auto& x : test.x) preds.push_back(model->predict(x));
    return make_result(dataset, method, frontend, preds, test.y, prep, seed);
}

ExperimentResult run_deep_cell(const GridConfig& cfg, const std::string& dataset,
                               const std::string& method, const std::string& frontend,
                               const PreparedSplit& prep, std::uint64_t seed) {
    const std::string arch_key = method + "|" + frontend;
    auto it = cfg.archs.find(arch_key);
    if (it == cfg.archs.end()) {
        throw ConfigError("no architecture config registered for cell '" + arch_key + "'");
    }
    nn::Arch arch = it->second;
    // The published nets fix 8 outputs; the grid adapts the head to the
    // dataset's label set.
    const int k = static_cast<int>(prep.label_names.size());
    arch.n_classes = k;
    arch.layers[arch.layers.size() - 2].units = k;

    nn::Dataset<float> train_set, test_set;
    for (std::size_t i = 0; i < prep.train_waves.size(); ++i) {
        train_set.inputs.push_back(input_tensor_for(prep.train_waves[i], arch.input));
        train_set.labels.push_back(prep.train_classes[i]);
    }
    for (std::size_t i = 0; i < prep.test_waves.size(); ++i) {
        test_set.inputs.push_back(input_tensor_for(prep.test_waves[i], arch.input));
        test_set.labels.push_back(prep.test_classes[i]);
    }

    nn::TrainConfig tc;
    tc.seed = seed;
    tc.threads = cfg.threads;
    tc.epochs = cfg.epochs_override > 0 ? cfg.epochs_override : nn::default_epochs(method);

    auto trained = nn::train(arch, tc, train_set, test_set);
    std::vector<int> preds;
    for (const auto& input : test_set.inputs) {
        preds.push_back(nn::predict(trained.net, input, cfg.threads).label);
    }
    return make_result(dataset, method, frontend, preds, test_set.labels, prep, seed);
}

}  // namespace

std::string grid_cell_key(const std::string& dataset, const std::string& method,
                          const std::string& frontend, std::uint64_t seed) {
    return dataset + "|" + method + "|" + frontend + "|" + std::to_string(seed);
}

GridOutcome run_experiment_grid(const GridConfig& cfg, const GridHooks& hooks) {
    if (cfg.datasets.empty()) throw ConfigError("grid needs at least one dataset");
    if (cfg.frontends.empty() || cfg.methods.empty()) {
        throw ConfigError("grid needs at least one frontend and one method");
    }

    GridOutcome outcome;
    for (const auto& ds : cfg.datasets) {
        PreparedSplit prep;
        try {
            prep = prepare_dataset(ds, cfg.ratio, cfg.seed, cfg.split_by_speaker);
        } catch (const Error& e) {
            for (const auto& frontend : cfg.frontends) {
                for (const auto& method : cfg.methods) {
                    outcome.failures.push_back({ds.name, method, frontend, e.what()});
                }
            }
            continue;
        }

        for (const auto& frontend : cfg.frontends) {
            // Classical baselines need fixed-length vectors; the raw
            // frontend feeds the deep models only.
            const bool classical_valid = frontend != "raw";

            LabeledVectors train_vec, test_vec;
            bool has_classical = false;
            for (const auto& method : cfg.methods) {
                if (!is_deep_method(method) && classical_valid) has_classical = true;
            }
            if (has_classical) {
                const FeatureKind kind = feature_kind_from_name(frontend);
                train_vec.n_classes = static_cast<int>(prep.label_names.size());
                test_vec.n_classes = train_vec.n_classes;
                for (std::size_t i = 0; i < prep.train_waves.size(); ++i) {
                    train_vec.x.push_back(
                        summarize_mean(extract_features(prep.train_waves[i], kind)));
                    train_vec.y.push_back(prep.train_classes[i]);
                }
                for (std::size_t i = 0; i < prep.test_waves.size(); ++i) {
                    test_vec.x.push_back(
                        summarize_mean(extract_features(prep.test_waves[i], kind)));
                    test_vec.y.push_back(prep.test_classes[i]);
                }
            }

            for (const auto& method : cfg.methods) {
                const bool deep = is_deep_method(method);
                if (!deep && !classical_valid) continue;  // not a table cell

                const std::string key = grid_cell_key(ds.name, method, frontend, cfg.seed);
                ExperimentResult result;
                if (hooks.load && hooks.load(key, result)) {
                    outcome.results.push_back(std::move(result));
                    continue;
                }
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    result = deep ? run_deep_cell(cfg, ds.name, method, frontend, prep, cfg.seed)
                                  : run_classical_cell(ds.name, method, frontend, train_vec,
                                                       test_vec, prep, cfg.seed);
                } catch (const Error& e) {
                    outcome.failures.push_back({ds.name, method, frontend, e.what()});
                    continue;
                }
                if (cfg.record_timing) {
                    result.wall_ms = std::chrono::duration<double, std::milli>(
                                         std::chrono::steady_clock::now() - t0)
                                         .count();
                }
                if (hooks.store) hooks.store(key, result);
                outcome.results.push_back(std::move(result));
            }
        }
    }
    return outcome;
}

}  // namespace ser
