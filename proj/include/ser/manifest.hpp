#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ser/labels.hpp"

namespace ser {

struct ManifestEntry {
    std::string path;
    int label = 0;  // canonical emotion id
    std::string speaker;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

// A labeled file list plus the ordered set of emotion ids it uses.
struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::vector<int> label_set;  // ascending, every entry's label is a member

    std::size_t size() const { return entries.size(); }
    // Position of a canonical emotion id inside label_set; throws LabelError
    // if the id is not part of this dataset.
    int class_index(int label) const;
};

enum class CorpusConvention { ravdess, emodb, manifest_csv };

// Walks a corpus directory (or reads a manifest CSV) and builds a manifest.
// RAVDESS: third hyphen field of the file name is the emotion code
// (01..08 -> neutral, bored, happy, sad, angry, fear, disgust, surprised;
// calm is folded into bored), last field is the actor. EMO-DB: the sixth
// character is the emotion letter (W angry, L bored, E disgust, A fear,
// F happy, T sad, N neutral), the first two characters are the speaker.
// Entries come out sorted by path. Throws LabelError naming the offending
// file, EmptyCorpus when nothing matched.
DatasetManifest scan_corpus(const std::filesystem::path& root, CorpusConvention convention);

// CSV with exact header "path,label,speaker"; labels are emotion names.
// Relative paths are kept verbatim.
DatasetManifest read_manifest_csv(const std::filesystem::path& path);
void write_manifest_csv(const std::filesystem::path& path, const DatasetManifest& m);

struct DataSplit {
    DatasetManifest train;
    DatasetManifest test;
    std::uint64_t seed = 0;
    double ratio = 0.0;
};

// Deterministic stratified split: per class (in label_set order) the entries
// are shuffled with the seeded PRNG and the first ceil(ratio * n) go to
// train. Throws StratifyError if any class has fewer than 2 samples.
DataSplit split_stratified(const DatasetManifest& m, double ratio, std::uint64_t seed);

// Group split on the speaker field: speakers are shuffled and assigned to
// train until at least ratio of all samples is covered. Both sides keep the
// source label_set. Throws StratifyError when either side would be empty.
DataSplit split_by_speaker(const DatasetManifest& m, double ratio, std::uint64_t seed);

}  // namespace ser
