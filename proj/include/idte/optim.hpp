#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>

#include "idte/tensor.hpp"

namespace idte {

struct AdamHyper {
    double lr = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamHyper hyper;
    std::uint64_t step = 0;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;

    /// Zero moments shaped like `params`.
    static AdamState for_params(const ModelParams& params, AdamHyper hyper = {});
};

struct AdamResult {
    ModelParams params;
    AdamState state;
};

/// One bias-corrected Adam update. Parameters absent from `grads` are treated
/// as having a zero gradient. Pure: equal inputs give bit-identical outputs.
AdamResult adam_step(const ModelParams& params, const GradientMap& grads, const AdamState& state);

/// In-place variant used by the training loop.
void adam_step_inplace(ModelParams& params, const GradientMap& grads, AdamState& state);

/// Glorot-uniform matrix in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

// Binary checkpoint: "IDTE", version 0x01, u32 count, then per tensor
// u16 name length, name bytes, u8 rank, rank x u32 dims, float32 values.
// All integers and floats little-endian.
inline constexpr std::uint8_t kCheckpointVersion = 0x01;

void write_checkpoint(std::ostream& out, const ModelParams& params);
ModelParams read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace idte
