#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ser::nn {

struct LayerSpec {
    enum class Type { conv1d, relu, batchnorm, dropout, dense, lstm, flatten, softmax };

    Type type = Type::relu;
    // conv1d
    int filters = 0;
    int kernel = 5;
    int stride = 1;
    // dense / lstm
    int units = 0;
    bool return_sequences = false;
    // dropout
    double rate = 0.25;
    // batchnorm
    double momentum = 0.1;
    double eps = 1e-5;
};

// Network input kind. The frontends pin the feature shapes; raw audio is
// [1, seconds * 16000] at the canonical rate.
struct InputSpec {
    enum class Kind { raw, mfcc, logmel };
    Kind kind = Kind::raw;
    double seconds = 6.0;  // raw only; "raw6s" is the canonical 6 s value
};

struct Arch {
    std::string name;
    InputSpec input;
    int n_classes = 0;
    std::vector<LayerSpec> layers;
};

// Per-sample input shape [C, L] implied by the input kind.
std::vector<std::size_t> input_sample_shape(const InputSpec& input);

// Checks structural invariants: non-empty, final layer Softmax directly
// preceded by Dense{n_classes}. Throws ConfigError with the field path.
void validate_arch(const Arch& arch);

// JSON round-trip (schema_version 1, tagged layer objects).
Arch arch_from_json_text(const std::string& text);
std::string arch_to_json_text(const Arch& arch);
Arch load_arch(const std::filesystem::path& path);
void save_arch(const std::filesystem::path& path, const Arch& arch);

std::string layer_type_name(LayerSpec::Type t);

}  // namespace ser::nn
