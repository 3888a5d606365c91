#include "ser/nn/checkpoint.hpp"

#include <json.hpp>

#include "ser/errors.hpp"
#include "ser/serm.hpp"

using nlohmann::json;

namespace ser::nn {

namespace {

json tensor_entry(const std::string& name, const std::string& role,
                  const std::vector<std::size_t>& shape) {
    json j;
    j["name"] = name;
    j["role"] = role;
    j["shape"] = shape;
    return j;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Network<float>& net,
                     const AdamState<float>& adam, const Rng& rng,
                     const std::vector<int>& label_set) {
    json header;
    header["schema_version"] = 1;
    header["kind"] = "nn-checkpoint";
    header["arch"] = json::parse(arch_to_json_text(net.arch()));
    header["adam_step"] = adam.step;
    header["label_set"] = label_set;
    // u64 words exceed JSON's exact integer range, so store decimal strings.
    json state = json::array();
    for (auto word : rng.state()) state.push_back(std::to_string(word));
    header["rng_state"] = state;

    json tensors = json::array();
    std::vector<std::vector<float>> blobs;
    auto params = net.parameters();
    for (const auto& p : params) {
        tensors.push_back(tensor_entry(p.name, "param", p.value->shape));
        blobs.push_back(p.value->data);
    }
    for (const auto& b : net.buffers()) {
        tensors.push_back(tensor_entry(b.name, "buffer", b.value->shape));
        blobs.push_back(b.value->data);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        tensors.push_back(tensor_entry(params[i].name, "adam_m", adam.m[i].shape));
        blobs.push_back(adam.m[i].data);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        tensors.push_back(tensor_entry(params[i].name, "adam_v", adam.v[i].shape));
        blobs.push_back(adam.v[i].data);
    }
    header["tensors"] = tensors;
    write_serm(path, header, blobs);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    auto [header, blobs] = read_serm(path);
    if (header.value("kind", "") != "nn-checkpoint") {
        throw ParseError(path.string() + " is not an nn checkpoint");
    }
    if (header.value("schema_version", 0) != 1) {
        throw ParseError("unsupported checkpoint schema version");
    }

    Arch arch = arch_from_json_text(header.at("arch").dump());
    LoadedCheckpoint ckpt(arch);
    ckpt.net.init(0);
    ckpt.adam = AdamState<float>::init_for(ckpt.net);
    ckpt.adam.step = header.at("adam_step").get<std::int64_t>();
    if (header.contains("label_set")) {
        ckpt.label_set = header.at("label_set").get<std::vector<int>>();
    }

    std::array<std::uint64_t, 4> state{};
    const auto& jstate = header.at("rng_state");
    if (!jstate.is_array() || jstate.size() != 4) throw ParseError("bad rng_state");
    for (std::size_t i = 0; i < 4; ++i) {
        state[i] = std::stoull(jstate[i].get<std::string>());
    }
    ckpt.rng.set_state(state);

    auto params = ckpt.net.parameters();
    auto buffers = ckpt.net.buffers();
    const auto& tensors = header.at("tensors");
    if (tensors.size() != blobs.size()) throw ParseError("tensor directory/blob count mismatch");

    std::size_t blob_i = 0;
    auto take = [&](const std::string& want_name, const std::string& want_role,
                    Tensor<float>& dst) {
        const auto& entry = tensors.at(blob_i);
        if (entry.at("name") != want_name || entry.at("role") != want_role) {
            throw ParseError("checkpoint tensor order mismatch at " + want_name);
        }
        const auto& blob = blobs.at(blob_i);
        if (blob.size() != dst.size()) {
            throw ParseError("checkpoint tensor size mismatch at " + want_name);
        }
        dst.data = blob;
        ++blob_i;
    };

    for (auto& p : params) take(p.name, "param", *p.value);
    for (auto& b : buffers) take(b.name, "buffer", *b.value);
    for (std::size_t i = 0; i < params.size(); ++i) {
        take(params[i].name, "adam_m", ckpt.adam.m[i]);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        take(params[i].name, "adam_v", ckpt.adam.v[i]);
    }
    return ckpt;
}

}  // namespace ser::nn
