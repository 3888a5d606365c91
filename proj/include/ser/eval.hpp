#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ser/manifest.hpp"
#include "ser/nn/arch.hpp"

namespace ser {

// K x K counts; rows are true classes, columns are predictions.
struct ConfusionMatrix {
    std::vector<std::vector<std::size_t>> counts;

    std::size_t k() const { return counts.size(); }
    std::size_t total() const;
    std::size_t trace() const;
    std::size_t row_sum(std::size_t r) const;
    std::size_t col_sum(std::size_t c) const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& truths, int k);

// 100 * trace / total.
double accuracy_overall(const ConfusionMatrix& cm);

// One-vs-rest (TP + TN) / (TP + TN + FP + FN) * 100 for class c.
double accuracy_per_class(const ConfusionMatrix& cm, int c);

struct ClassAccuracy {
    std::string label;
    double accuracy = 0.0;
    std::size_t support = 0;  // true-class count in the test set; 0 means undefined support

    friend bool operator==(const ClassAccuracy&, const ClassAccuracy&) = default;
};

// One cell of the experiment tables.
struct ExperimentResult {
    std::string dataset;
    std::string method;
    std::string frontend;  // raw | mfcc | logmel
    double accuracy = 0.0;
    std::vector<ClassAccuracy> per_class;
    std::vector<std::string> labels;
    ConfusionMatrix cm;
    double wall_ms = 0.0;
    std::uint64_t seed = 0;

    friend bool operator==(const ExperimentResult&, const ExperimentResult&) = default;
};

std::string experiment_result_to_json(const ExperimentResult& r);
ExperimentResult experiment_result_from_json(const std::string& text);

// Writable confusion CSV: header row of predicted labels, one row per true
// label.
std::string confusion_csv(const ExperimentResult& r);

struct ReportFiles {
    std::string json_text;  // schema_version 1, all results
    std::string csv_text;   // dataset,method,frontend,accuracy,seed,wall_ms
    // One text table per (frontend, method family), key like "mfcc-classical";
    // the best value per row carries a trailing '*'.
    std::map<std::string, std::string> tables;
};

ReportFiles render_report(const std::vector<ExperimentResult>& results);

bool is_deep_method(const std::string& method);

// ---- experiment grid ----------------------------------------------------

struct GridDataset {
    std::string name;
    DatasetManifest manifest;
    std::filesystem::path base_dir;  // for resolving relative entry paths
};

struct GridConfig {
    std::vector<GridDataset> datasets;
    std::vector<std::string> frontends;  // subset of {mfcc, logmel, raw}
    std::vector<std::string> methods;    // svm rf dt nb knn mv stck cnn lstm cnn-lstm
    std::map<std::string, nn::Arch> archs;  // key "<method>|<frontend>", deep cells
    std::uint64_t seed = 42;
    double ratio = 0.8;
    bool split_by_speaker = false;
    int epochs_override = 0;  // 0 keeps the per-architecture defaults
    int threads = 1;
    bool record_timing = false;
};

struct GridFailure {
    std::string dataset;
    std::string method;
    std::string frontend;
    std::string message;

    friend bool operator==(const GridFailure&, const GridFailure&) = default;
};

struct GridOutcome {
    std::vector<ExperimentResult> results;
    std::vector<GridFailure> failures;
};

// Caching hooks so an interrupted run can resume: load returns true when the
// cell is already done (filling the result), store persists a fresh cell.
struct GridHooks {
    std::function<bool(const std::string& cell_key, ExperimentResult& out)> load;
    std::function<void(const std::string& cell_key, const ExperimentResult&)> store;
};

std::string grid_cell_key(const std::string& dataset, const std::string& method,
                          const std::string& frontend, std::uint64_t seed);

// Runs every valid (dataset, frontend, method) cell: classical methods on
// the feature frontends, deep methods on all three. Per-cell failures are
// recorded and the grid continues.
GridOutcome run_experiment_grid(const GridConfig& cfg, const GridHooks& hooks = {});

}  // namespace ser
