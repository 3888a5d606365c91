#include "ser/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ser/errors.hpp"
#include "ser/rng.hpp"

namespace fs = std::filesystem;

namespace ser {

namespace {

std::vector<int> collect_label_set(const std::vector<ManifestEntry>& entries) {
    std::set<int> seen;
    for (const auto& e : entries) seen.insert(e.label);
    return {seen.begin(), seen.end()};
}

int ravdess_emotion(const std::string& code, const std::string& file) {
    // RAVDESS codes 01..08: neutral, calm, happy, sad, angry, fearful,
    // disgust, surprised. Calm is folded into bored.
    static const std::map<std::string, std::string_view> table = {
        {"01", "neutral"}, {"02", "bored"},   {"03", "happy"},     {"04", "sad"},
        {"05", "angry"},   {"06", "fear"},    {"07", "disgust"},   {"08", "surprised"},
    };
    auto it = table.find(code);
    if (it == table.end()) throw LabelError("unknown RAVDESS emotion code '" + code + "' in " + file);
    return *emotion_id(it->second);
}

int emodb_emotion(char code, const std::string& file) {
    switch (code) {
        case 'W': return *emotion_id("angry");
        case 'L': return *emotion_id("bored");
        case 'E': return *emotion_id("disgust");
        case 'A': return *emotion_id("fear");
        case 'F': return *emotion_id("happy");
        case 'T': return *emotion_id("sad");
        case 'N': return *emotion_id("neutral");
        default:
            throw LabelError(std::string("unknown EMO-DB emotion letter '") + code + "' in " + file);
    }
}

std::vector<std::string> split_fields(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

ManifestEntry parse_ravdess_name(const fs::path& p) {
    auto fields = split_fields(p.stem().string(), '-');
    if (fields.size() < 7) {
        throw LabelError("RAVDESS file name needs 7 hyphen fields: " + p.string());
    }
    ManifestEntry e;
    e.path = p.string();
    e.label = ravdess_emotion(fields[2], p.string());
    e.speaker = fields[6];
    return e;
}

ManifestEntry parse_emodb_name(const fs::path& p) {
    std::string stem = p.stem().string();
    if (stem.size() < 6) throw LabelError("EMO-DB file name too short: " + p.string());
    ManifestEntry e;
    e.path = p.string();
    e.label = emodb_emotion(stem[5], p.string());
    e.speaker = stem.substr(0, 2);
    return e;
}

bool is_wav(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".wav";
}

}  // namespace

int DatasetManifest::class_index(int label) const {
    auto it = std::find(label_set.begin(), label_set.end(), label);
    if (it == label_set.end()) {
        throw LabelError("label " + std::to_string(label) + " not in this dataset's label set");
    }
    return static_cast<int>(it - label_set.begin());
}

DatasetManifest scan_corpus(const fs::path& root, CorpusConvention convention) {
    if (convention == CorpusConvention::manifest_csv) return read_manifest_csv(root);
    if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());

    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && is_wav(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());  // directory iteration order is OS-dependent

    DatasetManifest m;
    for (const auto& f : files) {
        m.entries.push_back(convention == CorpusConvention::ravdess ? parse_ravdess_name(f)
                                                                    : parse_emodb_name(f));
    }
    if (m.entries.empty()) throw EmptyCorpus("EmptyCorpus: no wav files under " + root.string());
    m.label_set = collect_label_set(m.entries);
    return m;
}

DatasetManifest read_manifest_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty manifest: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "path,label,speaker") {
        throw ParseError("manifest header must be 'path,label,speaker', got '" + line + "'");
    }

    DatasetManifest m;
    std::size_t line_no = 1;
    std::set<std::string> seen_paths;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_fields(line, ',');
        if (fields.size() != 3) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 3 fields, got " + std::to_string(fields.size()));
        }
        auto id = emotion_id(fields[1]);
        if (!id) {
            throw LabelError(path.string() + ":" + std::to_string(line_no) +
                             ": unknown emotion name '" + fields[1] + "'");
        }
        if (!seen_paths.insert(fields[0]).second) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": duplicate path '" + fields[0] + "'");
        }
        m.entries.push_back({fields[0], *id, fields[2]});
    }
    if (m.entries.empty()) throw EmptyCorpus("EmptyCorpus: manifest has no rows: " + path.string());
    m.label_set = collect_label_set(m.entries);
    return m;
}

void write_manifest_csv(const fs::path& path, const DatasetManifest& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "path,label,speaker\n";
    for (const auto& e : m.entries) {
        out << e.path << ',' << emotion_name(e.label) << ',' << e.speaker << '\n';
    }
}

DataSplit split_stratified(const DatasetManifest& m, double ratio, std::uint64_t seed) {
    if (ratio <= 0.0 || ratio >= 1.0) throw ConfigError("split ratio must be in (0, 1)");

    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < m.entries.size(); ++i) by_label[m.entries[i].label].push_back(i);
    for (const auto& [label, idx] : by_label) {
        if (idx.size() < 2) {
            throw StratifyError("class '" + std::string(emotion_name(label)) +
                                "' has fewer than 2 samples");
        }
    }

    DataSplit split;
    split.seed = seed;
    split.ratio = ratio;
    split.train.label_set = m.label_set;
    split.test.label_set = m.label_set;

    Rng rng(seed);
    std::vector<std::size_t> train_ids;
    std::vector<std::size_t> test_ids;
    for (int label : m.label_set) {
        auto idx = by_label.at(label);
        rng.shuffle(idx);
        std::size_t n_train = static_cast<std::size_t>(
            std::ceil(ratio * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i < n_train ? train_ids : test_ids).push_back(idx[i]);
        }
    }
    // Keep manifest order inside each side so the split is a stable view.
    std::sort(train_ids.begin(), train_ids.end());
    std::sort(test_ids.begin(), test_ids.end());
    for (auto i : train_ids) split.train.entries.push_back(m.entries[i]);
    for (auto i : test_ids) split.test.entries.push_back(m.entries[i]);
    return split;
}

DataSplit split_by_speaker(const DatasetManifest& m, double ratio, std::uint64_t seed) {
    if (ratio <= 0.0 || ratio >= 1.0) throw ConfigError("split ratio must be in (0, 1)");

    std::map<std::string, std::size_t> speaker_counts;
    for (const auto& e : m.entries) ++speaker_counts[e.speaker];
    std::vector<std::string> speakers;
    for (const auto& [s, n] : speaker_counts) speakers.push_back(s);
    if (speakers.size() < 2) {
        throw StratifyError("speaker split needs at least 2 distinct speakers");
    }

    Rng rng(seed ^ 0x5eaec0ffULL);
    rng.shuffle(speakers);

    const std::size_t want_train = static_cast<std::size_t>(
        std::ceil(ratio * static_cast<double>(m.entries.size())));
    std::set<std::string> train_speakers;
    std::size_t covered = 0;
    for (const auto& s : speakers) {
        if (covered >= want_train && train_speakers.size() < speakers.size()) break;
        train_speakers.insert(s);
        covered += speaker_counts[s];
    }
    if (train_speakers.size() == speakers.size()) train_speakers.erase(speakers.back());

    DataSplit split;
    split.seed = seed;
    split.ratio = ratio;
    split.train.label_set = m.label_set;
    split.test.label_set = m.label_set;
    for (const auto& e : m.entries) {
        (train_speakers.count(e.speaker) ? split.train : split.test).entries.push_back(e);
    }
    if (split.train.entries.empty() || split.test.entries.empty()) {
        throw StratifyError("speaker split left one side empty");
    }
    return split;
}

}  // namespace ser
