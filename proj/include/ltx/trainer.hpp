// Continual-pretraining loop: packing, batching, AdamW updates, checkpoints, resume.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ltx/checkpoint.hpp"
#include "ltx/corpus.hpp"
#include "ltx/optim.hpp"
#include "ltx/tokenizer.hpp"

namespace ltx::train {

struct TrainConfig {
  std::size_t seq_len = 2048;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::optional<double> grad_clip;     // global L2 norm

  void validate(const nn::ModelConfig& model) const;
};

nlohmann::ordered_json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Token stream of all documents, each followed by the end-of-text token.
std::vector<TokenId> pack_documents(const tokenizer::Vocab& vocab, std::span<const corpus::Document> docs);

struct Block {
  std::vector<TokenId> input;
  std::vector<TokenId> target;  // input shifted left by one
};

struct Batches {
  std::vector<std::vector<Block>> batches;
  std::size_t n_blocks = 0;
  std::size_t dropped_tokens = 0;  // trailing tokens that never serve as an input
};

/// Cuts the stream into consecutive blocks of seq_len inputs (stride seq_len), shuffles
/// the block order with `seed` and groups them into batches; an incomplete final
/// batch is dropped. Throws DataError when fewer than seq_len + 1 tokens are given.
Batches make_batches(std::span<const TokenId> stream, std::size_t seq_len, std::size_t batch_size,
                     std::uint64_t seed);

struct LossRecord {
  std::uint64_t step;
  double lr;
  double loss;
};

struct TrainResult {
  std::vector<LossRecord> curve;
  bool aborted = false;
  std::string abort_reason;
};

struct TrainHooks {
  std::function<void(const LossRecord&)> on_step;
  std::function<void(const Checkpoint&)> on_checkpoint;
  std::optional<std::uint64_t> stop_after;  // last step to run in this call
};

/// Runs steps ckpt.step()+1 .. total_steps. Step s uses lr_at(s - 1) and the batch
/// determined by (seed, s), so a resumed run replays the uninterrupted one exactly.
/// A non-finite loss aborts the run with `ckpt` left at the last good step.
TrainResult train(Checkpoint& ckpt, std::span<const TokenId> stream, const TrainConfig& train_cfg,
                  const OptimizerConfig& opt_cfg, const TrainHooks& hooks = {});

std::string loss_curve_csv(std::span<const LossRecord> curve);

}  // namespace ltx::train
