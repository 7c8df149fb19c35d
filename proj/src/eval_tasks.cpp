#include "ltx/eval_tasks.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace ltx::eval {

void TaskItem::validate() const {
  if (choices.size() < 2) throw DataError("item '" + id + "' has fewer than two choices");
  if (gold >= choices.size()) throw DataError("item '" + id + "' has gold index out of range");
}

void Task::validate() const {
  std::set<std::string> ids;
  std::set<std::pair<std::string, std::vector<std::string>>> content;
  for (const auto& it : items) {
    it.validate();
    ids.insert(it.id);
    content.emplace(it.context, it.choices);
  }
  for (const auto& p : fewshot_pool) {
    p.validate();
    if (ids.contains(p.id) || content.contains({p.context, p.choices})) {
      throw DataError("few-shot pool item '" + p.id + "' also appears among the evaluated items");
    }
  }
}

double binomial_stderr(double accuracy, std::size_t n) {
  if (n == 0) return 0.0;
  return std::sqrt(accuracy * (1.0 - accuracy) / static_cast<double>(n));
}

std::vector<std::size_t> choose_exemplars(std::size_t pool_size, std::size_t k, std::uint64_t seed) {
  if (k > pool_size) {
    throw std::invalid_argument("few-shot pool has " + std::to_string(pool_size) + " items; " + std::to_string(k) +
                                " requested");
  }
  std::vector<std::size_t> idx(pool_size);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(k);
  return idx;
}

std::string build_prompt(const TaskItem& item, std::size_t k_shots, std::span<const TaskItem> pool,
                         std::uint64_t seed) {
  std::string prompt;
  for (auto i : choose_exemplars(pool.size(), k_shots, seed)) {
    const auto& ex = pool[i];
    prompt += ex.context + " " + ex.choices.at(ex.gold) + "\n";
  }
  return prompt + item.context;
}

template <typename Scalar>
double score_choice(const nn::Model<Scalar>& model, std::span<const TokenId> prompt, std::span<const TokenId> choice) {
  if (choice.empty()) return 0.0;
  if (prompt.empty()) throw std::invalid_argument("scoring needs a non-empty prompt");
  std::vector<TokenId> seq(prompt.begin(), prompt.end());
  seq.insert(seq.end(), choice.begin(), choice.end());
  // the last token is only ever a target
  if (seq.size() - 1 > model.config.max_seq_len) {
    throw std::invalid_argument("prompt and choice need " + std::to_string(seq.size() - 1) +
                                " positions; context window is " + std::to_string(model.config.max_seq_len));
  }
  const auto logits = nn::forward(model, std::span(seq).first(seq.size() - 1));
  double total = 0.0;
  for (std::size_t i = 0; i < choice.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(prompt.size() - 1 + i);
    const Eigen::RowVectorXd z = logits.row(row).template cast<double>();
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    total += z(static_cast<Eigen::Index>(choice[i])) - lse;
  }
  return total;
}

template <typename Scalar>
double score_choice(const nn::Model<Scalar>& model, const tokenizer::Vocab& vocab, std::string_view prompt,
                    std::string_view choice) {
  const auto p = tokenizer::encode(vocab, prompt);
  const auto c = tokenizer::encode(vocab, choice);
  return score_choice(model, p, c);
}

EvalResult summarize(std::vector<ItemLog> items, std::size_t k, std::uint64_t seed) {
  EvalResult r;
  r.n = items.size();
  r.k = k;
  r.seed = seed;
  std::size_t correct = 0;
  for (const auto& it : items) correct += it.predicted == it.gold ? 1 : 0;
  r.accuracy = r.n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(r.n);
  r.stderr_ = binomial_stderr(r.accuracy, r.n);
  r.items = std::move(items);
  return r;
}

template <typename Scalar>
EvalResult evaluate(const nn::Model<Scalar>& model, const tokenizer::Vocab& vocab, const Task& task,
                    const EvalConfig& cfg) {
  task.validate();
  std::vector<ItemLog> logs;
  logs.reserve(task.items.size());
  for (const auto& item : task.items) {
    ItemLog log;
    log.id = item.id;
    log.gold = item.gold;
    try {
      const auto prompt = build_prompt(item, cfg.k_shots, task.fewshot_pool, cfg.seed);
      for (const auto& choice : item.choices) {
        const auto continuation = choice.empty() ? std::string() : " " + choice;
        const double s = score_choice(model, vocab, prompt, continuation);
        log.scores.push_back(s);
        log.normalized_scores.push_back(continuation.empty() ? 0.0 : s / static_cast<double>(continuation.size()));
      }
    } catch (const std::exception& e) {
      throw DataError("item '" + item.id + "': " + e.what());
    }
    log.predicted = static_cast<std::size_t>(
        std::distance(log.scores.begin(), std::max_element(log.scores.begin(), log.scores.end())));
    logs.push_back(std::move(log));
  }
  return summarize(std::move(logs), cfg.k_shots, cfg.seed);
}

std::string format_accuracy(double accuracy, double stderr_) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f±%.3f", accuracy, stderr_);
  return buf;
}

nlohmann::ordered_json to_json(const EvalResult& r) {
  return {{"accuracy", r.accuracy}, {"stderr", r.stderr_}, {"n", r.n}, {"k", r.k}, {"seed", r.seed},
          {"display", format_accuracy(r.accuracy, r.stderr_)}};
}

std::string per_item_csv(const EvalResult& r) {
  std::ostringstream out;
  out << "item_id,gold,predicted,correct,scores,normalized_scores\n";
  out.precision(10);
  for (const auto& it : r.items) {
    out << it.id << ',' << it.gold << ',' << it.predicted << ',' << (it.gold == it.predicted ? 1 : 0) << ',';
    for (std::size_t i = 0; i < it.scores.size(); ++i) out << (i ? ";" : "") << it.scores[i];
    out << ',';
    for (std::size_t i = 0; i < it.normalized_scores.size(); ++i) out << (i ? ";" : "") << it.normalized_scores[i];
    out << '\n';
  }
  return out.str();
}

std::vector<TaskItem> load_items(const std::filesystem::path& jsonl, std::string_view id_prefix) {
  std::ifstream in(jsonl);
  if (!in) throw DataError("cannot read task items: " + jsonl.string());
  std::vector<TaskItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    try {
      if (j.is_discarded()) throw DataError("invalid JSON");
      TaskItem it;
      it.id = j.contains("id") ? j["id"].get<std::string>() : std::string(id_prefix) + std::to_string(lineno);
      it.context = j.at("context").get<std::string>();
      it.choices = j.at("choices").get<std::vector<std::string>>();
      it.gold = j.at("gold").get<std::size_t>();
      it.validate();
      items.push_back(std::move(it));
    } catch (const std::exception& e) {
      throw DataError(jsonl.filename().string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return items;
}

Task load_task(const std::filesystem::path& header) {
  auto j = nlohmann::json::parse(read_file(header), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError("task header is not a JSON object: " + header.string());
  const auto dir = header.parent_path();
  Task t;
  try {
    t.name = j.at("name").get<std::string>();
    t.items = load_items(dir / j.at("items").get<std::string>(), "item-");
    if (j.contains("fewshot_pool") && !j["fewshot_pool"].is_null()) {
      t.fewshot_pool = load_items(dir / j["fewshot_pool"].get<std::string>(), "pool-");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed task header: ") + e.what());
  }
  t.validate();
  return t;
}

template double score_choice<float>(const nn::Model<float>&, std::span<const TokenId>, std::span<const TokenId>);
template double score_choice<double>(const nn::Model<double>&, std::span<const TokenId>, std::span<const TokenId>);
template double score_choice<float>(const nn::Model<float>&, const tokenizer::Vocab&, std::string_view,
                                    std::string_view);
template double score_choice<double>(const nn::Model<double>&, const tokenizer::Vocab&, std::string_view,
                                     std::string_view);
template EvalResult evaluate<float>(const nn::Model<float>&, const tokenizer::Vocab&, const Task&, const EvalConfig&);
template EvalResult evaluate<double>(const nn::Model<double>&, const tokenizer::Vocab&, const Task&,
                                     const EvalConfig&);

}  // namespace ltx::eval
