// Decoder-only causal transformer (pre-norm, GELU, learned absolute positions),
// templated on the scalar type: float for training, double for gradient checks.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ltx/common.hpp"

namespace ltx::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct ModelConfig {
  std::size_t n_layers = 24;
  std::size_t n_heads = 16;
  std::size_t d_model = 2048;
  std::size_t d_ff = 4 * 2048;
  std::size_t vocab_size = 50257;
  std::size_t max_seq_len = 2048;
  bool tie_embeddings = true;

  /// Throws std::invalid_argument when the shape is inconsistent.
  void validate() const;
  std::size_t head_dim() const { return d_model / n_heads; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::ordered_json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

template <typename Scalar>
struct LayerParams {
  RowVector<Scalar> ln1_gain, ln1_bias;
  Matrix<Scalar> w_qkv;  // d x 3d, columns [q | k | v], heads contiguous within each
  RowVector<Scalar> b_qkv;
  Matrix<Scalar> w_attn_out;  // d x d
  RowVector<Scalar> b_attn_out;
  RowVector<Scalar> ln2_gain, ln2_bias;
  Matrix<Scalar> w_fc;  // d x d_ff
  RowVector<Scalar> b_fc;
  Matrix<Scalar> w_proj;  // d_ff x d
  RowVector<Scalar> b_proj;
};

template <typename Scalar>
struct ModelParams {
  Matrix<Scalar> tok_emb;  // vocab x d; also the output projection when tied
  Matrix<Scalar> pos_emb;  // max_seq_len x d
  std::vector<LayerParams<Scalar>> layers;
  RowVector<Scalar> final_gain, final_bias;
  Matrix<Scalar> lm_head;  // vocab x d; empty when tied

  bool tied() const { return lm_head.size() == 0; }
};

/// Calls f(name, tensor_a, tensor_b, ...) for every parameter tensor, in a fixed order.
template <typename F, typename First, typename... Rest>
void visit_params(F&& f, First& first, Rest&... rest) {
  f(std::string("tok_emb"), first.tok_emb, rest.tok_emb...);
  f(std::string("pos_emb"), first.pos_emb, rest.pos_emb...);
  for (std::size_t l = 0; l < first.layers.size(); ++l) {
    const auto p = "layers." + std::to_string(l) + ".";
    f(p + "ln1.gain", first.layers[l].ln1_gain, rest.layers[l].ln1_gain...);
    f(p + "ln1.bias", first.layers[l].ln1_bias, rest.layers[l].ln1_bias...);
    f(p + "attn.w_qkv", first.layers[l].w_qkv, rest.layers[l].w_qkv...);
    f(p + "attn.b_qkv", first.layers[l].b_qkv, rest.layers[l].b_qkv...);
    f(p + "attn.w_out", first.layers[l].w_attn_out, rest.layers[l].w_attn_out...);
    f(p + "attn.b_out", first.layers[l].b_attn_out, rest.layers[l].b_attn_out...);
    f(p + "ln2.gain", first.layers[l].ln2_gain, rest.layers[l].ln2_gain...);
    f(p + "ln2.bias", first.layers[l].ln2_bias, rest.layers[l].ln2_bias...);
    f(p + "mlp.w_fc", first.layers[l].w_fc, rest.layers[l].w_fc...);
    f(p + "mlp.b_fc", first.layers[l].b_fc, rest.layers[l].b_fc...);
    f(p + "mlp.w_proj", first.layers[l].w_proj, rest.layers[l].w_proj...);
    f(p + "mlp.b_proj", first.layers[l].b_proj, rest.layers[l].b_proj...);
  }
  f(std::string("final_ln.gain"), first.final_gain, rest.final_gain...);
  f(std::string("final_ln.bias"), first.final_bias, rest.final_bias...);
  if (!first.tied()) f(std::string("lm_head"), first.lm_head, rest.lm_head...);
}

template <typename Scalar>
struct Model {
  ModelConfig config;
  ModelParams<Scalar> params;
};

/// All-zero parameters with the shapes implied by `cfg`.
template <typename Scalar>
ModelParams<Scalar> zero_params(const ModelConfig& cfg);

/// normal(0, 0.02) weights, unit layer-norm gains, zero biases.
template <typename Scalar>
ModelParams<Scalar> init_params(const ModelConfig& cfg, std::uint64_t seed);

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
  ModelParams<To> out;
  out.layers.resize(p.layers.size());
  // an empty `out` reads as tied, so lm_head is copied separately
  visit_params([](const std::string&, auto& dst, const auto& src) { dst = src.template cast<To>(); }, out, p);
  out.lm_head = p.lm_head.template cast<To>();
  return out;
}

template <typename To, typename From>
Model<To> cast_model(const Model<From>& m) {
  return {m.config, cast_params<To>(m.params)};
}

template <typename Scalar>
std::size_t parameter_count(const ModelParams<Scalar>& p) {
  std::size_t n = 0;
  visit_params([&n](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); }, p);
  return n;
}

/// Logits [tokens x vocab]. Position t depends only on tokens[0..t].
/// Throws std::invalid_argument for overlong input or ids outside the vocabulary.
template <typename Scalar>
Matrix<Scalar> forward(const Model<Scalar>& model, std::span<const TokenId> tokens);

template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& logits);

/// Mean over positions of -log softmax(logits)[target], in nats.
template <typename Scalar>
Scalar cross_entropy(const Matrix<Scalar>& logits, std::span<const TokenId> targets);

/// Accumulates weight * d(mean loss)/d(params) into `grads` (shaped like the
/// model's parameters) and returns the mean loss.
template <typename Scalar>
Scalar backward(const Model<Scalar>& model, std::span<const TokenId> tokens, std::span<const TokenId> targets,
                ModelParams<Scalar>& grads, Scalar weight = Scalar(1));

struct DecodeConfig {
  enum class Mode { Greedy, TopP };
  Mode mode = Mode::Greedy;
  double temperature = 0.8;
  double top_p = 0.9;
  std::uint64_t seed = 0;
};

nlohmann::ordered_json to_json(const DecodeConfig& cfg);

/// Returns prompt followed by up to max_new tokens; stops early after `stop_token`.
/// The context slides once the sequence exceeds max_seq_len.
template <typename Scalar>
std::vector<TokenId> generate(const Model<Scalar>& model, std::span<const TokenId> prompt, std::size_t max_new,
                              const DecodeConfig& cfg, std::optional<TokenId> stop_token = std::nullopt);

/// exp of the mean next-token loss over consecutive windows of up to `window` tokens.
template <typename Scalar>
double perplexity(const Model<Scalar>& model, std::span<const TokenId> stream, std::size_t window);

}  // namespace ltx::nn
