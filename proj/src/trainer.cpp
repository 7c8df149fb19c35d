#include "ltx/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

namespace ltx::train {

void TrainConfig::validate(const nn::ModelConfig& model) const {
  if (seq_len < 1 || seq_len > model.max_seq_len) {
    throw std::invalid_argument("seq_len must be in [1, max_seq_len]");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (grad_clip && !(*grad_clip > 0.0)) throw std::invalid_argument("grad_clip must be > 0");
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["seq_len"] = c.seq_len;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["checkpoint_every"] = c.checkpoint_every;
  j["grad_clip"] = c.grad_clip ? nlohmann::ordered_json(*c.grad_clip) : nlohmann::ordered_json(nullptr);
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.seq_len = j.value("seq_len", c.seq_len);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  if (j.contains("grad_clip") && !j["grad_clip"].is_null()) c.grad_clip = j["grad_clip"].get<double>();
  return c;
}

std::vector<TokenId> pack_documents(const tokenizer::Vocab& vocab, std::span<const corpus::Document> docs) {
  const auto eot = vocab.end_of_text();
  if (!eot) throw DataError("tokenizer has no end-of-text token");
  std::vector<TokenId> out;
  for (const auto& d : docs) {
    auto ids = tokenizer::encode(vocab, d.text);
    out.insert(out.end(), ids.begin(), ids.end());
    out.push_back(*eot);
  }
  return out;
}

Batches make_batches(std::span<const TokenId> stream, std::size_t seq_len, std::size_t batch_size,
                     std::uint64_t seed) {
  if (seq_len < 1 || batch_size < 1) throw std::invalid_argument("seq_len and batch_size must be >= 1");
  if (stream.size() < seq_len + 1) {
    throw DataError("token stream has " + std::to_string(stream.size()) + " tokens; need at least " +
                    std::to_string(seq_len + 1));
  }
  Batches out;
  out.n_blocks = (stream.size() - 1) / seq_len;
  out.dropped_tokens = stream.size() - out.n_blocks * seq_len;
  std::vector<std::size_t> order(out.n_blocks);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t b = 0; b + batch_size <= order.size(); b += batch_size) {
    std::vector<Block> batch;
    for (std::size_t i = b; i < b + batch_size; ++i) {
      const auto start = order[i] * seq_len;
      batch.push_back({{stream.begin() + static_cast<std::ptrdiff_t>(start),
                        stream.begin() + static_cast<std::ptrdiff_t>(start + seq_len)},
                       {stream.begin() + static_cast<std::ptrdiff_t>(start + 1),
                        stream.begin() + static_cast<std::ptrdiff_t>(start + seq_len + 1)}});
    }
    out.batches.push_back(std::move(batch));
  }
  if (out.batches.empty()) {
    throw DataError("token stream yields " + std::to_string(out.n_blocks) + " blocks, fewer than one batch of " +
                    std::to_string(batch_size));
  }
  return out;
}

namespace {

std::uint64_t epoch_seed(std::uint64_t seed, std::uint64_t epoch) {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (epoch + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

template <typename Scalar>
double squared_norm(const nn::ModelParams<Scalar>& g) {
  double s = 0.0;
  nn::visit_params([&s](const std::string&, const auto& t) { s += t.template cast<double>().squaredNorm(); }, g);
  return s;
}

}  // namespace

TrainResult train(Checkpoint& ckpt, std::span<const TokenId> stream, const TrainConfig& train_cfg,
                  const OptimizerConfig& opt_cfg, const TrainHooks& hooks) {
  opt_cfg.validate();
  train_cfg.validate(ckpt.config());
  TrainResult result;

  // the number of batches per epoch does not depend on the shuffle seed
  Batches epoch_batches = make_batches(stream, train_cfg.seq_len, train_cfg.batch_size, epoch_seed(train_cfg.seed, 0));
  const auto per_epoch = epoch_batches.batches.size();
  std::uint64_t cached_epoch = 0;
  auto batch_for = [&](std::uint64_t step) -> const std::vector<Block>& {
    const auto index = step - 1;
    if (const auto epoch = index / per_epoch; epoch != cached_epoch) {
      epoch_batches = make_batches(stream, train_cfg.seq_len, train_cfg.batch_size, epoch_seed(train_cfg.seed, epoch));
      cached_epoch = epoch;
    }
    return epoch_batches.batches[index % per_epoch];
  };

  auto grads = nn::zero_params<float>(ckpt.config());
  for (auto step = ckpt.step() + 1; step <= opt_cfg.total_steps; ++step) {
    if (hooks.stop_after && step > *hooks.stop_after) break;
    const double lr = lr_at(step - 1, opt_cfg);
    const auto& batch = batch_for(step);

    nn::visit_params([](const std::string&, auto& g) { g.setZero(); }, grads);
    double loss = 0.0;
    const float weight = 1.0f / static_cast<float>(batch.size());
    for (const auto& block : batch) {
      loss += static_cast<double>(nn::backward(ckpt.model, block.input, block.target, grads, weight));
    }
    loss /= static_cast<double>(batch.size());
    if (!std::isfinite(loss)) {
      result.aborted = true;
      result.abort_reason = "non-finite loss at step " + std::to_string(step);
      return result;
    }
    if (train_cfg.grad_clip) {
      const double norm = std::sqrt(squared_norm(grads));
      if (norm > *train_cfg.grad_clip) {
        const auto scale = static_cast<float>(*train_cfg.grad_clip / norm);
        nn::visit_params([scale](const std::string&, auto& g) { g *= scale; }, grads);
      }
    }
    try {
      adam_step(ckpt.model.params, grads, ckpt.optimizer, opt_cfg, lr);
    } catch (const std::domain_error& e) {
      result.aborted = true;
      result.abort_reason = e.what();
      return result;
    }
    const LossRecord rec{step, lr, loss};
    result.curve.push_back(rec);
    if (hooks.on_step) hooks.on_step(rec);
    if (hooks.on_checkpoint && train_cfg.checkpoint_every > 0 && step % train_cfg.checkpoint_every == 0) {
      hooks.on_checkpoint(ckpt);
    }
  }
  return result;
}

std::string loss_curve_csv(std::span<const LossRecord> curve) {
  std::ostringstream out;
  out << "step,lr,loss\n";
  out << std::setprecision(17);
  for (const auto& r : curve) out << r.step << ',' << r.lr << ',' << r.loss << '\n';
  return out.str();
}

}  // namespace ltx::train
