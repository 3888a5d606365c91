#include "ser/nn/arch.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "ser/dsp.hpp"
#include "ser/errors.hpp"

using nlohmann::json;

namespace ser::nn {

namespace {

const std::map<std::string, LayerSpec::Type>& type_table() {
    static const std::map<std::string, LayerSpec::Type> table = {
        {"conv1d", LayerSpec::Type::conv1d},   {"relu", LayerSpec::Type::relu},
        {"batchnorm", LayerSpec::Type::batchnorm}, {"dropout", LayerSpec::Type::dropout},
        {"dense", LayerSpec::Type::dense},     {"lstm", LayerSpec::Type::lstm},
        {"flatten", LayerSpec::Type::flatten}, {"softmax", LayerSpec::Type::softmax},
    };
    return table;
}

LayerSpec layer_from_json(const json& j, std::size_t index) {
    const std::string where = "layers[" + std::to_string(index) + "]";
    if (!j.contains("type")) throw ConfigError(where + ": missing 'type'");
    const std::string type_name = j.at("type").get<std::string>();
    auto it = type_table().find(type_name);
    if (it == type_table().end()) {
        throw ConfigError(where + ": unknown layer type '" + type_name + "'");
    }

    LayerSpec spec;
    spec.type = it->second;
    switch (spec.type) {
        case LayerSpec::Type::conv1d:
            if (!j.contains("filters")) throw ConfigError(where + ": conv1d needs 'filters'");
            spec.filters = j.at("filters").get<int>();
            spec.kernel = j.value("kernel", 5);
            spec.stride = j.value("stride", 1);
            break;
        case LayerSpec::Type::dense:
            if (!j.contains("units")) throw ConfigError(where + ": dense needs 'units'");
            spec.units = j.at("units").get<int>();
            break;
        case LayerSpec::Type::lstm:
            if (!j.contains("units")) throw ConfigError(where + ": lstm needs 'units'");
            spec.units = j.at("units").get<int>();
            spec.return_sequences = j.value("return_sequences", false);
            break;
        case LayerSpec::Type::dropout:
            spec.rate = j.value("rate", 0.25);
            break;
        case LayerSpec::Type::batchnorm:
            spec.momentum = j.value("momentum", 0.1);
            spec.eps = j.value("eps", 1e-5);
            break;
        default:
            break;
    }
    return spec;
}

json layer_to_json(const LayerSpec& spec) {
    json j;
    j["type"] = layer_type_name(spec.type);
    switch (spec.type) {
        case LayerSpec::Type::conv1d:
            j["filters"] = spec.filters;
            j["kernel"] = spec.kernel;
            j["stride"] = spec.stride;
            break;
        case LayerSpec::Type::dense:
            j["units"] = spec.units;
            break;
        case LayerSpec::Type::lstm:
            j["units"] = spec.units;
            j["return_sequences"] = spec.return_sequences;
            break;
        case LayerSpec::Type::dropout:
            j["rate"] = spec.rate;
            break;
        case LayerSpec::Type::batchnorm:
            j["momentum"] = spec.momentum;
            j["eps"] = spec.eps;
            break;
        default:
            break;
    }
    return j;
}

}  // namespace

std::string layer_type_name(LayerSpec::Type t) {
    for (const auto& [name, type] : type_table()) {
        if (type == t) return name;
    }
    throw ConfigError("unknown layer type tag");
}

std::vector<std::size_t> input_sample_shape(const InputSpec& input) {
    switch (input.kind) {
        case InputSpec::Kind::raw: {
            const auto len = static_cast<std::size_t>(std::llround(input.seconds * 16000.0));
            if (len == 0) throw ConfigError("input.seconds too small");
            return {1, len};
        }
        case InputSpec::Kind::mfcc: {
            MfccConfig cfg;
            StftConfig stft;
            const auto len = static_cast<std::size_t>(std::llround(cfg.clip_seconds * 16000.0));
            return {static_cast<std::size_t>(cfg.n_mfcc),
                    stft_frame_count(len, stft.win_length(16000), stft.hop_length(16000))};
        }
        case InputSpec::Kind::logmel: {
            PreprocessConfig pre;
            MelConfig mel;
            StftConfig stft;
            const auto len = static_cast<std::size_t>(std::llround(pre.target_seconds * 16000.0));
            return {static_cast<std::size_t>(mel.n_mels),
                    stft_frame_count(len, stft.win_length(16000), stft.hop_length(16000))};
        }
    }
    throw ConfigError("unknown input kind");
}

void validate_arch(const Arch& arch) {
    if (arch.n_classes < 2) throw ConfigError("n_classes must be >= 2");
    if (arch.layers.size() < 2) throw ConfigError("layers: need at least Dense + Softmax");
    if (arch.layers.back().type != LayerSpec::Type::softmax) {
        throw ConfigError("layers: last layer must be softmax");
    }
    const auto& dense = arch.layers[arch.layers.size() - 2];
    if (dense.type != LayerSpec::Type::dense || dense.units != arch.n_classes) {
        throw ConfigError("layers: softmax must be preceded by dense with units == n_classes");
    }
}

Arch arch_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("arch config is not valid JSON: ") + e.what());
    }
    if (j.value("schema_version", 0) != 1) {
        throw ConfigError("arch config: schema_version must be 1");
    }

    Arch arch;
    arch.name = j.value("name", "unnamed");
    if (!j.contains("input") || !j.at("input").contains("kind")) {
        throw ConfigError("arch config: missing input.kind");
    }
    const std::string kind = j.at("input").at("kind").get<std::string>();
    if (kind == "raw6s") {
        arch.input.kind = InputSpec::Kind::raw;
        arch.input.seconds = 6.0;
    } else if (kind == "raw") {
        arch.input.kind = InputSpec::Kind::raw;
        arch.input.seconds = j.at("input").value("seconds", 6.0);
    } else if (kind == "mfcc") {
        arch.input.kind = InputSpec::Kind::mfcc;
    } else if (kind == "logmel") {
        arch.input.kind = InputSpec::Kind::logmel;
    } else {
        throw ConfigError("arch config: input.kind must be raw6s, raw, mfcc or logmel");
    }
    if (!j.contains("n_classes")) throw ConfigError("arch config: missing n_classes");
    arch.n_classes = j.at("n_classes").get<int>();
    if (!j.contains("layers") || !j.at("layers").is_array()) {
        throw ConfigError("arch config: missing layers array");
    }
    std::size_t i = 0;
    for (const auto& jl : j.at("layers")) arch.layers.push_back(layer_from_json(jl, i++));
    validate_arch(arch);
    return arch;
}

std::string arch_to_json_text(const Arch& arch) {
    json j;
    j["schema_version"] = 1;
    j["name"] = arch.name;
    switch (arch.input.kind) {
        case InputSpec::Kind::raw:
            if (arch.input.seconds == 6.0) {
                j["input"] = {{"kind", "raw6s"}};
            } else {
                j["input"] = {{"kind", "raw"}, {"seconds", arch.input.seconds}};
            }
            break;
        case InputSpec::Kind::mfcc:
            j["input"] = {{"kind", "mfcc"}};
            break;
        case InputSpec::Kind::logmel:
            j["input"] = {{"kind", "logmel"}};
            break;
    }
    j["n_classes"] = arch.n_classes;
    j["layers"] = json::array();
    for (const auto& spec : arch.layers) j["layers"].push_back(layer_to_json(spec));
    return j.dump(2) + "\n";
}

Arch load_arch(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open arch config " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return arch_from_json_text(text);
}

void save_arch(const std::filesystem::path& path, const Arch& arch) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write arch config " + path.string());
    out << arch_to_json_text(arch);
}

}  // namespace ser::nn
