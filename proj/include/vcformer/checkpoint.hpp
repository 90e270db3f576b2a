#pragma once

#include <string>
#include <vector>

#include "vcformer/model.hpp"

namespace vcformer {

/**
 * Bit-exact container of named tensors plus a configuration document.
 *
 * Byte layout (all integers little-endian):
 *   magic "VCFM" (4 bytes)
 *   format version        u32
 *   config length         u32, followed by that many UTF-8 bytes
 *   tensor count          u32
 *   per tensor:
 *     name length         u16, followed by the name bytes
 *     rank                u32
 *     extents             u64 each
 *     dtype tag           u8 (0 = f32, 1 = f64)
 *     data                raw row-major scalars, little-endian
 */
struct Checkpoint {
    std::string config_json;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/** Model parameters plus the train normalization statistics. */
Checkpoint make_checkpoint(const ModelParams& params, const Tensor& norm_mean,
                           const Tensor& norm_std, const std::string& config_json);

/** Writes matching named tensors back into the model; verifies shapes. */
void load_into_model(const Checkpoint& ckpt, ModelParams& params);

} // namespace vcformer
