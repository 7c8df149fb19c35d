#include "ltx/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ltx::nn {

void ModelConfig::validate() const {
  if (n_layers == 0 || n_heads == 0 || d_model == 0 || d_ff == 0 || vocab_size == 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) throw std::invalid_argument("d_model must be divisible by n_heads");
  if (max_seq_len < 1) throw std::invalid_argument("max_seq_len must be >= 1");
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
  return {{"n_layers", c.n_layers}, {"n_heads", c.n_heads},         {"d_model", c.d_model},
          {"d_ff", c.d_ff},         {"vocab_size", c.vocab_size},   {"max_seq_len", c.max_seq_len},
          {"tie_embeddings", c.tie_embeddings}, {"positional", "learned_absolute"}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.d_model = j.value("d_model", c.d_model);
  c.d_ff = j.value("d_ff", 4 * c.d_model);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
  c.tie_embeddings = j.value("tie_embeddings", c.tie_embeddings);
  if (j.contains("positional") && j["positional"] != "learned_absolute") {
    throw DataError("only learned_absolute positions are supported");
  }
  c.validate();
  return c;
}

nlohmann::ordered_json to_json(const DecodeConfig& c) {
  nlohmann::ordered_json j;
  j["mode"] = c.mode == DecodeConfig::Mode::Greedy ? "greedy" : "top_p";
  j["temperature"] = c.temperature;
  j["top_p"] = c.top_p;
  j["seed"] = c.seed;
  return j;
}

template <typename Scalar>
ModelParams<Scalar> zero_params(const ModelConfig& cfg) {
  cfg.validate();
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  const auto f = static_cast<Eigen::Index>(cfg.d_ff);
  const auto v = static_cast<Eigen::Index>(cfg.vocab_size);
  ModelParams<Scalar> p;
  p.tok_emb = Matrix<Scalar>::Zero(v, d);
  p.pos_emb = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(cfg.max_seq_len), d);
  p.layers.resize(cfg.n_layers);
  for (auto& l : p.layers) {
    l.ln1_gain = RowVector<Scalar>::Zero(d);
    l.ln1_bias = RowVector<Scalar>::Zero(d);
    l.w_qkv = Matrix<Scalar>::Zero(d, 3 * d);
    l.b_qkv = RowVector<Scalar>::Zero(3 * d);
    l.w_attn_out = Matrix<Scalar>::Zero(d, d);
    l.b_attn_out = RowVector<Scalar>::Zero(d);
    l.ln2_gain = RowVector<Scalar>::Zero(d);
    l.ln2_bias = RowVector<Scalar>::Zero(d);
    l.w_fc = Matrix<Scalar>::Zero(d, f);
    l.b_fc = RowVector<Scalar>::Zero(f);
    l.w_proj = Matrix<Scalar>::Zero(f, d);
    l.b_proj = RowVector<Scalar>::Zero(d);
  }
  p.final_gain = RowVector<Scalar>::Zero(d);
  p.final_bias = RowVector<Scalar>::Zero(d);
  if (!cfg.tie_embeddings) p.lm_head = Matrix<Scalar>::Zero(v, d);
  return p;
}

template <typename Scalar>
ModelParams<Scalar> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  auto p = zero_params<Scalar>(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  visit_params(
      [&](const std::string& name, auto& t) {
        const bool is_gain = name.ends_with(".gain");
        const bool is_bias = name.ends_with(".bias") || name.find(".b_") != std::string::npos;
        for (Eigen::Index i = 0; i < t.size(); ++i) {
          t.data()[i] = is_gain ? Scalar(1) : is_bias ? Scalar(0) : static_cast<Scalar>(normal(rng));
        }
      },
      p);
  return p;
}

namespace {

constexpr double kLayerNormEps = 1e-5;

template <typename Scalar>
struct NormCache {
  Matrix<Scalar> xhat;
  Vector<Scalar> rstd;
};

template <typename Scalar>
Matrix<Scalar> layer_norm(const Matrix<Scalar>& x, const RowVector<Scalar>& gain, const RowVector<Scalar>& bias,
                          NormCache<Scalar>& cache) {
  const Vector<Scalar> mean = x.rowwise().mean();
  cache.xhat = x.colwise() - mean;
  const Vector<Scalar> var = cache.xhat.array().square().rowwise().mean();
  cache.rstd = (var.array() + Scalar(kLayerNormEps)).rsqrt();
  cache.xhat = cache.xhat.array().colwise() * cache.rstd.array();
  return (cache.xhat.array().rowwise() * gain.array()).rowwise() + bias.array();
}

template <typename Scalar>
Matrix<Scalar> layer_norm_backward(const Matrix<Scalar>& dy, const NormCache<Scalar>& cache,
                                   const RowVector<Scalar>& gain, RowVector<Scalar>& dgain,
                                   RowVector<Scalar>& dbias) {
  dgain += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbias += dy.colwise().sum();
  const Matrix<Scalar> dxhat = dy.array().rowwise() * gain.array();
  const Vector<Scalar> m1 = dxhat.rowwise().mean();
  const Vector<Scalar> m2 = (dxhat.array() * cache.xhat.array()).rowwise().mean();
  Matrix<Scalar> dx = dxhat.colwise() - m1;
  dx -= (cache.xhat.array().colwise() * m2.array()).matrix();
  return dx.array().colwise() * cache.rstd.array();
}

template <typename Scalar>
constexpr Scalar kGeluC = Scalar(0.7978845608028654);  // sqrt(2 / pi)
template <typename Scalar>
constexpr Scalar kGeluA = Scalar(0.044715);

template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::tanh(kGeluC<Scalar> * (x + kGeluA<Scalar> * x * x * x)));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  const Scalar th = std::tanh(kGeluC<Scalar> * (x + kGeluA<Scalar> * x * x * x));
  return Scalar(0.5) * (Scalar(1) + th) +
         Scalar(0.5) * x * (Scalar(1) - th * th) * kGeluC<Scalar> * (Scalar(1) + Scalar(3) * kGeluA<Scalar> * x * x);
}

template <typename Scalar>
struct LayerCache {
  NormCache<Scalar> ln1, ln2;
  Matrix<Scalar> a1, qkv, attn, a2, h_pre, h_act;
  std::vector<Matrix<Scalar>> probs;  // per head, T x T, zero above the diagonal
};

template <typename Scalar>
struct ForwardCache {
  std::vector<LayerCache<Scalar>> layers;
  NormCache<Scalar> final_ln;
  Matrix<Scalar> final_out;
};

void check_tokens(const ModelConfig& cfg, std::span<const TokenId> tokens) {
  if (tokens.size() > cfg.max_seq_len) {
    throw std::invalid_argument("sequence of " + std::to_string(tokens.size()) + " tokens exceeds max_seq_len " +
                                std::to_string(cfg.max_seq_len));
  }
  for (auto t : tokens) {
    if (t >= cfg.vocab_size) throw std::invalid_argument("token id " + std::to_string(t) + " outside vocabulary");
  }
}

// Causal self-attention for one layer. Each query row only touches keys 0..t.
template <typename Scalar>
Matrix<Scalar> attention(const ModelConfig& cfg, const Matrix<Scalar>& qkv, std::vector<Matrix<Scalar>>* probs) {
  const auto T = qkv.rows();
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  const auto hd = static_cast<Eigen::Index>(cfg.head_dim());
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(hd));
  Matrix<Scalar> out(T, d);
  if (probs) probs->assign(cfg.n_heads, Matrix<Scalar>::Zero(T, T));
  for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(cfg.n_heads); ++h) {
    const auto q = qkv.middleCols(h * hd, hd);
    const auto k = qkv.middleCols(d + h * hd, hd);
    const auto v = qkv.middleCols(2 * d + h * hd, hd);
    for (Eigen::Index t = 0; t < T; ++t) {
      RowVector<Scalar> s = (q.row(t) * k.topRows(t + 1).transpose()) * scale;
      s = (s.array() - s.maxCoeff()).exp();
      s /= s.sum();
      out.row(t).segment(h * hd, hd) = s * v.topRows(t + 1);
      if (probs) (*probs)[static_cast<std::size_t>(h)].row(t).head(t + 1) = s;
    }
  }
  return out;
}

template <typename Scalar>
const Matrix<Scalar>& output_matrix(const ModelParams<Scalar>& p) {
  return p.tied() ? p.tok_emb : p.lm_head;
}

template <typename Scalar>
Matrix<Scalar> run_forward(const Model<Scalar>& model, std::span<const TokenId> tokens, ForwardCache<Scalar>* cache) {
  const auto& cfg = model.config;
  const auto& p = model.params;
  check_tokens(cfg, tokens);
  const auto T = static_cast<Eigen::Index>(tokens.size());
  Matrix<Scalar> x(T, static_cast<Eigen::Index>(cfg.d_model));
  for (Eigen::Index t = 0; t < T; ++t) x.row(t) = p.tok_emb.row(tokens[static_cast<std::size_t>(t)]) + p.pos_emb.row(t);

  LayerCache<Scalar> scratch;
  if (cache) cache->layers.resize(p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& L = p.layers[l];
    auto& c = cache ? cache->layers[l] : scratch;
    c.a1 = layer_norm(x, L.ln1_gain, L.ln1_bias, c.ln1);
    c.qkv = (c.a1 * L.w_qkv).rowwise() + L.b_qkv;
    c.attn = attention(cfg, c.qkv, cache ? &c.probs : nullptr);
    x += (c.attn * L.w_attn_out).rowwise() + L.b_attn_out;
    c.a2 = layer_norm(x, L.ln2_gain, L.ln2_bias, c.ln2);
    c.h_pre = (c.a2 * L.w_fc).rowwise() + L.b_fc;
    c.h_act = c.h_pre.unaryExpr([](Scalar v) { return gelu(v); });
    x += (c.h_act * L.w_proj).rowwise() + L.b_proj;
  }
  NormCache<Scalar> final_scratch;
  auto& fc = cache ? cache->final_ln : final_scratch;
  Matrix<Scalar> out = layer_norm(x, p.final_gain, p.final_bias, fc);
  Matrix<Scalar> logits = out * output_matrix(p).transpose();
  if (cache) cache->final_out = std::move(out);
  return logits;
}

}  // namespace

template <typename Scalar>
Matrix<Scalar> forward(const Model<Scalar>& model, std::span<const TokenId> tokens) {
  return run_forward<Scalar>(model, tokens, nullptr);
}

template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& logits) {
  Matrix<Scalar> p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp();
  p = p.array().colwise() / p.rowwise().sum().array();
  return p;
}

template <typename Scalar>
Scalar cross_entropy(const Matrix<Scalar>& logits, std::span<const TokenId> targets) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size()) {
    throw std::invalid_argument("logits and targets disagree in length");
  }
  if (targets.empty()) return Scalar(0);
  Scalar total = 0;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const auto row = logits.row(t);
    const Scalar m = row.maxCoeff();
    const Scalar lse = m + std::log((row.array() - m).exp().sum());
    total += lse - row(static_cast<Eigen::Index>(targets[static_cast<std::size_t>(t)]));
  }
  return total / static_cast<Scalar>(targets.size());
}

template <typename Scalar>
Scalar backward(const Model<Scalar>& model, std::span<const TokenId> tokens, std::span<const TokenId> targets,
                ModelParams<Scalar>& grads, Scalar weight) {
  const auto& cfg = model.config;
  const auto& p = model.params;
  if (tokens.size() != targets.size()) throw std::invalid_argument("tokens and targets disagree in length");
  check_tokens(cfg, targets);
  ForwardCache<Scalar> cache;
  const Matrix<Scalar> logits = run_forward(model, tokens, &cache);
  const Scalar loss = cross_entropy(logits, targets);
  const auto T = logits.rows();
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  const auto hd = static_cast<Eigen::Index>(cfg.head_dim());
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(hd));

  Matrix<Scalar> dlogits = softmax_rows(logits);
  for (Eigen::Index t = 0; t < T; ++t) dlogits(t, static_cast<Eigen::Index>(targets[static_cast<std::size_t>(t)])) -= 1;
  dlogits *= weight / static_cast<Scalar>(T);

  auto& d_out_matrix = p.tied() ? grads.tok_emb : grads.lm_head;
  d_out_matrix.noalias() += dlogits.transpose() * cache.final_out;
  Matrix<Scalar> dx = dlogits * output_matrix(p);
  dx = layer_norm_backward(dx, cache.final_ln, p.final_gain, grads.final_gain, grads.final_bias);

  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const auto& L = p.layers[li];
    auto& G = grads.layers[li];
    const auto& c = cache.layers[li];

    // MLP branch
    G.w_proj.noalias() += c.h_act.transpose() * dx;
    G.b_proj += dx.colwise().sum();
    Matrix<Scalar> dh = dx * L.w_proj.transpose();
    dh.array() *= c.h_pre.unaryExpr([](Scalar v) { return gelu_grad(v); }).array();
    G.w_fc.noalias() += c.a2.transpose() * dh;
    G.b_fc += dh.colwise().sum();
    const Matrix<Scalar> da2 = dh * L.w_fc.transpose();
    dx += layer_norm_backward(da2, c.ln2, L.ln2_gain, G.ln2_gain, G.ln2_bias);

    // attention branch
    G.w_attn_out.noalias() += c.attn.transpose() * dx;
    G.b_attn_out += dx.colwise().sum();
    const Matrix<Scalar> dattn = dx * L.w_attn_out.transpose();
    Matrix<Scalar> dqkv = Matrix<Scalar>::Zero(T, 3 * d);
    for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(cfg.n_heads); ++h) {
      const auto& P = c.probs[static_cast<std::size_t>(h)];
      const auto q = c.qkv.middleCols(h * hd, hd);
      const auto k = c.qkv.middleCols(d + h * hd, hd);
      const auto v = c.qkv.middleCols(2 * d + h * hd, hd);
      const auto dout = dattn.middleCols(h * hd, hd);
      const Matrix<Scalar> dP = dout * v.transpose();
      const Vector<Scalar> row_dot = (dP.array() * P.array()).rowwise().sum();
      const Matrix<Scalar> dS = P.array() * (dP.colwise() - row_dot).array();
      dqkv.middleCols(h * hd, hd) = (dS * k) * scale;
      dqkv.middleCols(d + h * hd, hd) = (dS.transpose() * q) * scale;
      dqkv.middleCols(2 * d + h * hd, hd) = P.transpose() * dout;
    }
    G.w_qkv.noalias() += c.a1.transpose() * dqkv;
    G.b_qkv += dqkv.colwise().sum();
    const Matrix<Scalar> da1 = dqkv * L.w_qkv.transpose();
    dx += layer_norm_backward(da1, c.ln1, L.ln1_gain, G.ln1_gain, G.ln1_bias);
  }

  for (Eigen::Index t = 0; t < T; ++t) {
    grads.tok_emb.row(tokens[static_cast<std::size_t>(t)]) += dx.row(t);
    grads.pos_emb.row(t) += dx.row(t);
  }
  return loss;
}

template <typename Scalar>
std::vector<TokenId> generate(const Model<Scalar>& model, std::span<const TokenId> prompt, std::size_t max_new,
                              const DecodeConfig& cfg, std::optional<TokenId> stop_token) {
  check_tokens(model.config, prompt);
  std::vector<TokenId> seq(prompt.begin(), prompt.end());
  if (max_new == 0) return seq;
  if (prompt.empty()) throw std::invalid_argument("generation needs a non-empty prompt");
  if (cfg.mode == DecodeConfig::Mode::TopP && !(cfg.temperature > 0.0 && cfg.top_p > 0.0 && cfg.top_p <= 1.0)) {
    throw std::invalid_argument("top-p decoding needs temperature > 0 and top_p in (0, 1]");
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const auto window = model.config.max_seq_len;
  for (std::size_t n = 0; n < max_new; ++n) {
    const auto start = seq.size() > window ? seq.size() - window : 0;
    const auto logits = forward(model, std::span(seq).subspan(start));
    const auto last = logits.row(logits.rows() - 1);
    TokenId next = 0;
    if (cfg.mode == DecodeConfig::Mode::Greedy) {
      Eigen::Index arg = 0;
      last.maxCoeff(&arg);  // first maximal index
      next = static_cast<TokenId>(arg);
    } else {
      Eigen::RowVectorXd z = last.template cast<double>() / cfg.temperature;
      z = (z.array() - z.maxCoeff()).exp();
      z /= z.sum();
      std::vector<TokenId> order(static_cast<std::size_t>(z.size()));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) { return z(a) > z(b); });
      double mass = 0.0;
      std::size_t keep = 0;
      while (keep < order.size() && (keep == 0 || mass < cfg.top_p)) mass += z(order[keep++]);
      double r = uniform(rng) * mass;
      next = order[keep - 1];
      for (std::size_t i = 0; i < keep; ++i) {
        r -= z(order[i]);
        if (r < 0.0) {
          next = order[i];
          break;
        }
      }
    }
    seq.push_back(next);
    if (stop_token && next == *stop_token) break;
  }
  return seq;
}

template <typename Scalar>
double perplexity(const Model<Scalar>& model, std::span<const TokenId> stream, std::size_t window) {
  if (stream.size() < 2) throw std::invalid_argument("perplexity needs at least two tokens");
  window = std::min(window, model.config.max_seq_len);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start + 1 < stream.size(); start += window) {
    const auto n = std::min(window, stream.size() - 1 - start);
    const auto logits = forward(model, stream.subspan(start, n));
    total += static_cast<double>(cross_entropy(logits, stream.subspan(start + 1, n))) * static_cast<double>(n);
    count += n;
  }
  return std::exp(total / static_cast<double>(count));
}

#define LTX_INSTANTIATE(S)                                                                                        \
  template ModelParams<S> zero_params<S>(const ModelConfig&);                                                     \
  template ModelParams<S> init_params<S>(const ModelConfig&, std::uint64_t);                                      \
  template Matrix<S> forward<S>(const Model<S>&, std::span<const TokenId>);                                       \
  template Matrix<S> softmax_rows<S>(const Matrix<S>&);                                                           \
  template S cross_entropy<S>(const Matrix<S>&, std::span<const TokenId>);                                        \
  template S backward<S>(const Model<S>&, std::span<const TokenId>, std::span<const TokenId>, ModelParams<S>&, S); \
  template std::vector<TokenId> generate<S>(const Model<S>&, std::span<const TokenId>, std::size_t,               \
                                            const DecodeConfig&, std::optional<TokenId>);                        \
  template double perplexity<S>(const Model<S>&, std::span<const TokenId>, std::size_t);

LTX_INSTANTIATE(float)
LTX_INSTANTIATE(double)

#undef LTX_INSTANTIATE

}  // namespace ltx::nn
