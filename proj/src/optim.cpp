#include "ltx/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ltx::train {

void OptimizerConfig::validate() const {
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in (0, 1)");
  }
  if (!(lr0 > 0.0)) throw std::invalid_argument("lr0 must be > 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be >= 0");
  if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
  if (warmup_steps >= total_steps && warmup_steps != 0) throw std::invalid_argument("warmup must end before total_steps");
}

nlohmann::ordered_json to_json(const OptimizerConfig& c) {
  return {{"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"weight_decay", c.weight_decay},
          {"lr0", c.lr0},
          {"schedule", "linear"},
          {"total_steps", c.total_steps},
          {"warmup_steps", c.warmup_steps},
          {"decay_embeddings", c.decay_embeddings}};
}

OptimizerConfig optimizer_config_from_json(const nlohmann::json& j) {
  OptimizerConfig c;
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.lr0 = j.value("lr0", c.lr0);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.decay_embeddings = j.value("decay_embeddings", c.decay_embeddings);
  if (j.contains("schedule") && j["schedule"] != "linear") throw DataError("only the linear schedule is supported");
  c.validate();
  return c;
}

double lr_at(std::uint64_t step, const OptimizerConfig& cfg) {
  if (step > cfg.total_steps) {
    throw std::out_of_range("step " + std::to_string(step) + " outside schedule of " +
                            std::to_string(cfg.total_steps) + " steps");
  }
  if (step < cfg.warmup_steps) {
    return cfg.lr0 * (static_cast<double>(step) / static_cast<double>(cfg.warmup_steps));
  }
  // fraction first, so both ends of the decay are exact
  return cfg.lr0 * (static_cast<double>(cfg.total_steps - step) /
                    static_cast<double>(cfg.total_steps - cfg.warmup_steps));
}

template <typename Scalar>
void adam_update(std::span<Scalar> theta, std::span<const Scalar> grad, std::span<Scalar> m, std::span<Scalar> v,
                 std::uint64_t step, double lr, double weight_decay, const OptimizerConfig& cfg) {
  if (step < 1) throw std::invalid_argument("Adam step index starts at 1");
  if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
    throw std::invalid_argument("Adam tensors disagree in size");
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const double shrink = 1.0 - lr * weight_decay;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<Scalar>(mi);
    v[i] = static_cast<Scalar>(vi);
    const double m_hat = mi / bc1;
    const double v_hat = vi / bc2;
    theta[i] = static_cast<Scalar>(static_cast<double>(theta[i]) * shrink - lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
  }
}

template <typename Scalar>
void adam_step(nn::ModelParams<Scalar>& params, const nn::ModelParams<Scalar>& grads, AdamState<Scalar>& state,
               const OptimizerConfig& cfg, double lr) {
  nn::visit_params(
      [](const std::string& name, const auto& g) {
        if (!g.allFinite()) throw std::domain_error("non-finite gradient in tensor '" + name + "'");
      },
      grads);
  const auto step = state.step + 1;
  nn::visit_params(
      [&](const std::string& name, auto& theta, const auto& g, auto& m, auto& v) {
        const bool embedding = name == "tok_emb" || name == "pos_emb" || name == "lm_head";
        const double wd = (embedding && !cfg.decay_embeddings) ? 0.0 : cfg.weight_decay;
        const auto n = static_cast<std::size_t>(theta.size());
        adam_update<Scalar>({theta.data(), n}, {g.data(), n}, {m.data(), n}, {v.data(), n}, step, lr, wd, cfg);
      },
      params, grads, state.m, state.v);
  state.step = step;
}

template void adam_update<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                                 std::uint64_t, double, double, const OptimizerConfig&);
template void adam_update<double>(std::span<double>, std::span<const double>, std::span<double>, std::span<double>,
                                  std::uint64_t, double, double, const OptimizerConfig&);
template void adam_step<float>(nn::ModelParams<float>&, const nn::ModelParams<float>&, AdamState<float>&,
                               const OptimizerConfig&, double);
template void adam_step<double>(nn::ModelParams<double>&, const nn::ModelParams<double>&, AdamState<double>&,
                                const OptimizerConfig&, double);

}  // namespace ltx::train
