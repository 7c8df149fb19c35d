// Adam with decoupled weight decay and a linear warmup/decay schedule.
#pragma once

#include <cstdint>
#include <span>

#include <json.hpp>

#include "ltx/model.hpp"

namespace ltx::train {

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.1;
  double lr0 = 5e-5;
  std::uint64_t total_steps = 200;
  std::uint64_t warmup_steps = 0;
  /// When false, token/position embeddings and the output head are not decayed.
  bool decay_embeddings = true;

  void validate() const;
};

nlohmann::ordered_json to_json(const OptimizerConfig& cfg);
OptimizerConfig optimizer_config_from_json(const nlohmann::json& j);

/// Learning rate at schedule position `step` in [0, total_steps]: linear ramp to lr0
/// over the warmup, then linear decay to 0 at total_steps.
double lr_at(std::uint64_t step, const OptimizerConfig& cfg);

template <typename Scalar>
struct AdamState {
  nn::ModelParams<Scalar> m;
  nn::ModelParams<Scalar> v;
  std::uint64_t step = 0;  // number of updates applied
};

template <typename Scalar>
AdamState<Scalar> zero_state(const nn::ModelConfig& cfg) {
  return {nn::zero_params<Scalar>(cfg), nn::zero_params<Scalar>(cfg), 0};
}

/// One Adam update on a flat tensor, `step` >= 1 being the 1-based update index:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
///   theta <- theta (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)
template <typename Scalar>
void adam_update(std::span<Scalar> theta, std::span<const Scalar> grad, std::span<Scalar> m, std::span<Scalar> v,
                 std::uint64_t step, double lr, double weight_decay, const OptimizerConfig& cfg);

/// Applies one update to every tensor and advances state.step. Throws
/// std::domain_error naming the tensor if any gradient is non-finite; no
/// parameter is modified in that case.
template <typename Scalar>
void adam_step(nn::ModelParams<Scalar>& params, const nn::ModelParams<Scalar>& grads, AdamState<Scalar>& state,
               const OptimizerConfig& cfg, double lr);

}  // namespace ltx::train
