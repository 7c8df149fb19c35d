// k-shot multiple-choice evaluation by summed log-likelihood of each choice.
//
// Prompt template: each exemplar is rendered as "<context> <gold choice>", exemplars
// are joined by "\n", and the query context follows on its own line. With k = 0 the
// prompt is the bare query context. A choice is scored as the continuation
// " <choice>" (a single leading space), so an empty choice scores 0.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ltx/model.hpp"
#include "ltx/tokenizer.hpp"

namespace ltx::eval {

struct TaskItem {
  std::string id;
  std::string context;
  std::vector<std::string> choices;
  std::size_t gold = 0;

  void validate() const;
};

struct Task {
  std::string name;
  std::vector<TaskItem> items;
  std::vector<TaskItem> fewshot_pool;

  /// Items valid and pool disjoint from items (by id and by content).
  void validate() const;
};

struct EvalConfig {
  std::size_t k_shots = 5;
  std::uint64_t seed = 0;
};

struct ItemLog {
  std::string id;
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::vector<double> scores;             // summed log-likelihood per choice
  std::vector<double> normalized_scores;  // score / UTF-8 bytes of the choice
};

struct EvalResult {
  double accuracy = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<ItemLog> items;
};

/// sqrt(p (1 - p) / n).
double binomial_stderr(double accuracy, std::size_t n);

/// Exemplar indices drawn without replacement from the pool, fixed per seed.
std::vector<std::size_t> choose_exemplars(std::size_t pool_size, std::size_t k, std::uint64_t seed);

std::string build_prompt(const TaskItem& item, std::size_t k_shots, std::span<const TaskItem> pool,
                         std::uint64_t seed);

/// Sum over choice tokens of log p(token | prompt, earlier choice tokens).
/// Throws std::invalid_argument when prompt + choice exceed the context window.
template <typename Scalar>
double score_choice(const nn::Model<Scalar>& model, std::span<const TokenId> prompt, std::span<const TokenId> choice);

template <typename Scalar>
double score_choice(const nn::Model<Scalar>& model, const tokenizer::Vocab& vocab, std::string_view prompt,
                    std::string_view choice);

/// Argmax of score_choice per item (lowest index wins ties).
template <typename Scalar>
EvalResult evaluate(const nn::Model<Scalar>& model, const tokenizer::Vocab& vocab, const Task& task,
                    const EvalConfig& cfg);

/// Accuracy, stderr and per-item log from precomputed predictions.
EvalResult summarize(std::vector<ItemLog> items, std::size_t k, std::uint64_t seed);

/// "0.231±0.014"
std::string format_accuracy(double accuracy, double stderr_);

nlohmann::ordered_json to_json(const EvalResult& r);
std::string per_item_csv(const EvalResult& r);

/// Task file: a JSON header {"name", "items": <jsonl path>, "fewshot_pool": <jsonl path>}
/// whose paths are relative to the header; each JSONL line is {"context", "choices", "gold"}
/// with an optional "id".
Task load_task(const std::filesystem::path& header);
std::vector<TaskItem> load_items(const std::filesystem::path& jsonl, std::string_view id_prefix);

}  // namespace ltx::eval
