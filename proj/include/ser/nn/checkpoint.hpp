#pragma once

#include <filesystem>

#include "ser/nn/adam.hpp"
#include "ser/nn/network.hpp"
#include "ser/rng.hpp"

namespace ser::nn {

// A trained float-precision model with its optimizer and RNG state, as
// stored in a SERM file. Round-tripping through disk is byte-exact.
// label_set carries the canonical emotion ids the class indices map to;
// it may be empty for models trained outside the corpus pipeline.
struct LoadedCheckpoint {
    Network<float> net;
    AdamState<float> adam;
    Rng rng;
    std::vector<int> label_set;

    explicit LoadedCheckpoint(const Arch& arch) : net(arch), rng(0) {}
};

void save_checkpoint(const std::filesystem::path& path, Network<float>& net,
                     const AdamState<float>& adam, const Rng& rng,
                     const std::vector<int>& label_set = {});

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ser::nn
