// Model checkpoint: parameters + optimizer state in an LTB1 container, with a JSON
// sidecar (`<path>.json`) carrying the model config and schedule position.
#pragma once

#include <filesystem>
#include <vector>

#include "ltx/model.hpp"
#include "ltx/optim.hpp"
#include "ltx/tensor_io.hpp"

namespace ltx {

struct Checkpoint {
  nn::Model<float> model;
  train::AdamState<float> optimizer;

  const nn::ModelConfig& config() const { return model.config; }
  std::uint64_t step() const { return optimizer.step; }
};

/// Freshly initialised model with zeroed optimizer state.
Checkpoint new_checkpoint(const nn::ModelConfig& cfg, std::uint64_t seed);

std::vector<Tensor> to_tensors(const Checkpoint& ckpt);
/// Throws DataError when a tensor is missing or mis-shaped.
Checkpoint from_tensors(const nn::ModelConfig& cfg, std::uint64_t step, std::span<const Tensor> tensors);

std::filesystem::path sidecar_path(const std::filesystem::path& ckpt_path);

/// Writes container and sidecar, each through a temporary file and rename.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ltx
