#include "ltx/human_eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace ltx::humeval {

using nlohmann::ordered_json;

void SelectionConfig::validate() const {
  if (min_chars >= max_chars) throw std::invalid_argument("min_chars must be below max_chars");
  if (n_texts == 0) throw std::invalid_argument("n_texts must be positive");
}

// ---------------------------------------------------------------- sentences and splits

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Length of a terminator at text[i] (. ! ? or U+2026), else 0.
std::size_t terminator_at(std::string_view text, std::size_t i) {
  const char c = text[i];
  if (c == '.' || c == '!' || c == '?') return 1;
  if (text.substr(i, 3) == "\xE2\x80\xA6") return 3;
  return 0;
}

// Length of a closing quote or bracket at text[i], else 0.
std::size_t closer_at(std::string_view text, std::size_t i) {
  const char c = text[i];
  if (c == '"' || c == '\'' || c == ')' || c == ']' || c == '}') return 1;
  for (std::string_view s : {"\xC2\xBB", "\xE2\x80\x9D", "\xE2\x80\x99", "\xE2\x80\xBA"}) {
    if (text.substr(i, s.size()) == s) return s.size();
  }
  return 0;
}

struct WordSpan {
  std::size_t begin, end;
};

std::vector<WordSpan> words_in(std::string_view text, std::size_t begin, std::size_t end) {
  std::vector<WordSpan> out;
  std::size_t i = begin;
  while (i < end) {
    while (i < end && is_space(text[i])) ++i;
    const auto start = i;
    while (i < end && !is_space(text[i])) ++i;
    if (i > start) out.push_back({start, i});
  }
  return out;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(std::string_view text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    const auto start = i;
    std::size_t end = text.size();
    while (i < text.size()) {
      const auto t = terminator_at(text, i);
      if (t == 0) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < text.size() && terminator_at(text, j) > 0) j += terminator_at(text, j);
      while (j < text.size() && closer_at(text, j) > 0) j += closer_at(text, j);
      if (j == text.size() || is_space(text[j])) {
        end = j;
        break;
      }
      i = j;
    }
    out.emplace_back(start, end);
    i = end;
  }
  return out;
}

std::string to_string(SplitStrategy s) {
  std::string out = s.position == SplitPosition::Begin ? "begin" : "middle";
  out += s.point == SplitPoint::MidSentence ? "_mid_sentence" : "_end_sentence";
  return out;
}

SplitStrategy strategy_from_string(std::string_view s) {
  for (auto st : kAllStrategies) {
    if (to_string(st) == s) return st;
  }
  throw DataError("unknown split strategy: " + std::string(s));
}

SplitText split_text(std::string_view text, SplitStrategy strategy) {
  const auto sentences = sentence_spans(text);
  const auto n = sentences.size();
  if (n < 2) throw std::invalid_argument("text needs at least two sentences to be split");
  const std::size_t end_sentence = strategy.position == SplitPosition::Begin ? 1 : (n + 1) / 2;  // 1-based
  std::size_t cut = 0;
  if (strategy.point == SplitPoint::EndSentence) {
    cut = sentences[end_sentence - 1].second;
  } else {
    const auto& [b, e] = sentences[end_sentence];  // sentence end_sentence + 1
    const auto words = words_in(text, b, e);
    const auto half = std::max<std::size_t>(words.size() / 2, 1);
    cut = words[half - 1].end;
  }
  return {std::string(text.substr(0, cut)), std::string(text.substr(cut))};
}

std::vector<SplitStrategy> assign_strategies(std::size_t n, std::uint64_t seed) {
  if (n % kAllStrategies.size() != 0) throw std::invalid_argument("number of texts must be a multiple of 4");
  std::vector<SplitStrategy> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(kAllStrategies[i % kAllStrategies.size()]);
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

// ---------------------------------------------------------------- selection

std::vector<SourceText> select_texts(std::span<const corpus::Document> heldout, const SelectionConfig& cfg,
                                     std::uint64_t seed) {
  cfg.validate();
  std::map<std::string, std::vector<const corpus::Document*>> by_genre;
  std::size_t too_short = 0, too_long = 0, one_sentence = 0;
  for (const auto& d : heldout) {
    const auto len = utf8_length(d.text);
    if (len < cfg.min_chars) {
      ++too_short;
    } else if (len > cfg.max_chars) {
      ++too_long;
    } else if (sentence_spans(d.text).size() < 2) {
      ++one_sentence;
    } else {
      by_genre[d.genre].push_back(&d);
    }
  }
  std::size_t eligible = 0;
  for (const auto& [g, v] : by_genre) eligible += v.size();
  if (eligible < cfg.n_texts) {
    throw DataError("held-out pool has " + std::to_string(eligible) + " texts within " +
                    std::to_string(cfg.min_chars) + "-" + std::to_string(cfg.max_chars) +
                    " characters with at least two sentences; " + std::to_string(cfg.n_texts) + " needed (" +
                    std::to_string(too_short) + " below the minimum length, " + std::to_string(too_long) +
                    " above the maximum, " + std::to_string(one_sentence) + " single-sentence)");
  }
  const auto genres = by_genre.size();
  std::mt19937_64 rng(seed);
  std::vector<SourceText> out;
  std::size_t g_index = 0;
  for (auto& [genre, docs] : by_genre) {
    const auto quota = cfg.n_texts / genres + (g_index < cfg.n_texts % genres ? 1 : 0);
    ++g_index;
    if (docs.size() < quota) {
      throw DataError("genre '" + genre + "' has " + std::to_string(docs.size()) + " eligible texts; its quota is " +
                      std::to_string(quota));
    }
    std::sort(docs.begin(), docs.end(), [](auto* a, auto* b) { return a->id < b->id; });
    std::shuffle(docs.begin(), docs.end(), rng);
    for (std::size_t i = 0; i < quota; ++i) out.push_back({docs[i]->id, docs[i]->genre, docs[i]->text});
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

double mean_length(std::span<const SourceText> texts) {
  if (texts.empty()) return 0.0;
  double total = 0.0;
  for (const auto& t : texts) total += static_cast<double>(utf8_length(t.text));
  return total / static_cast<double>(texts.size());
}

// ---------------------------------------------------------------- generation

template <typename Scalar>
std::string generate_continuation(const nn::Model<Scalar>& model, const tokenizer::Vocab& vocab,
                                  std::string_view context, std::size_t max_chars, const nn::DecodeConfig& cfg) {
  if (max_chars == 0) return {};
  auto prompt = tokenizer::encode(vocab, context);
  const auto window = model.config.max_seq_len;
  if (prompt.empty()) throw std::invalid_argument("context encodes to no tokens");
  if (prompt.size() >= window) prompt.erase(prompt.begin(), prompt.end() - static_cast<std::ptrdiff_t>(window - 1));
  const auto seq = nn::generate(model, prompt, max_chars, cfg, vocab.end_of_text());
  std::vector<TokenId> fresh(seq.begin() + static_cast<std::ptrdiff_t>(prompt.size()), seq.end());
  if (auto eot = vocab.end_of_text(); eot && !fresh.empty() && fresh.back() == *eot) fresh.pop_back();
  for (auto k = fresh.size(); k > 0; --k) {
    auto text = tokenizer::decode_text(vocab, std::span(fresh).first(k)).text;
    if (utf8_length(text) <= max_chars) return text;
  }
  return {};
}

template std::string generate_continuation<float>(const nn::Model<float>&, const tokenizer::Vocab&, std::string_view,
                                                  std::size_t, const nn::DecodeConfig&);
template std::string generate_continuation<double>(const nn::Model<double>&, const tokenizer::Vocab&,
                                                   std::string_view, std::size_t, const nn::DecodeConfig&);

// ---------------------------------------------------------------- Latin square

std::string_view to_string(Origin o) { return o == Origin::Authentic ? "authentic" : "synthetic"; }
std::string_view to_string(ListId l) { return l == ListId::A ? "A" : "B"; }

ListId list_from_string(std::string_view s) {
  if (s == "A") return ListId::A;
  if (s == "B") return ListId::B;
  throw DataError("unknown list: " + std::string(s));
}

const EvalItem* Experiment::find(std::string_view item_id) const {
  auto it = std::find_if(items.begin(), items.end(), [&](const EvalItem& e) { return e.item_id == item_id; });
  return it == items.end() ? nullptr : &*it;
}

Experiment build_latin_square(std::span<const BaseText> bases, std::uint64_t seed) {
  if (bases.empty()) throw DataError("no base texts");
  std::set<std::string> ids;
  for (const auto& b : bases) {
    if (b.base_id.empty() || !ids.insert(b.base_id).second) throw DataError("base ids must be unique and non-empty");
  }
  std::vector<EvalItem> list_a, list_b;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    const auto& b = bases[i];
    EvalItem auth{"", b.base_id, b.context, b.authentic, Origin::Authentic, ListId::A, "", b.strategy, nullptr};
    EvalItem synth{"", b.base_id, b.context, b.synthetic, Origin::Synthetic, ListId::B, b.generation.model_id,
                   b.strategy, {{"model_id", b.generation.model_id}, {"decode", nn::to_json(b.generation.decode)}}};
    if (i % 2 == 1) std::swap(auth.list, synth.list);
    for (auto* item : {&auth, &synth}) (item->list == ListId::A ? list_a : list_b).push_back(std::move(*item));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(list_a.begin(), list_a.end(), rng);
  std::shuffle(list_b.begin(), list_b.end(), rng);

  Experiment e;
  std::size_t next = 1;
  const auto width = std::to_string(2 * bases.size()).size();
  for (auto* list : {&list_a, &list_b}) {
    for (auto& item : *list) {
      auto num = std::to_string(next++);
      item.item_id = "item-" + std::string(width - std::min(width, num.size()), '0') + num;
      (item.list == ListId::A ? e.list_a : e.list_b).push_back(item.item_id);
      e.items.push_back(std::move(item));
    }
  }
  e.metadata = {{"seed", seed}, {"n_bases", bases.size()}, {"n_items", e.items.size()}};
  return e;
}

std::map<std::string, ListId> assign_evaluators(std::span<const std::string> evaluators, std::uint64_t seed) {
  if (evaluators.empty() || evaluators.size() % 2 != 0) {
    throw std::invalid_argument("evaluator count must be even and positive");
  }
  std::vector<std::string> order(evaluators.begin(), evaluators.end());
  std::sort(order.begin(), order.end());
  if (std::adjacent_find(order.begin(), order.end()) != order.end()) throw std::invalid_argument("duplicate evaluator");
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::map<std::string, ListId> out;
  for (std::size_t i = 0; i < order.size(); ++i) out[order[i]] = i < order.size() / 2 ? ListId::A : ListId::B;
  return out;
}

ordered_json to_json(const Experiment& e) {
  ordered_json j;
  j["items"] = ordered_json::array();
  for (const auto& it : e.items) {
    j["items"].push_back({{"item_id", it.item_id},
                          {"base_id", it.base_id},
                          {"context", it.context},
                          {"continuation", it.continuation},
                          {"origin", to_string(it.origin)},
                          {"list", to_string(it.list)},
                          {"model_id", it.origin == Origin::Synthetic ? ordered_json(it.model_id) : ordered_json()},
                          {"strategy", to_string(it.strategy)},
                          {"meta", it.meta}});
  }
  j["lists"] = {{"A", e.list_a}, {"B", e.list_b}};
  ordered_json ev = ordered_json::object();
  for (const auto& [id, l] : e.evaluators) ev[id] = to_string(l);
  j["evaluators"] = std::move(ev);
  j["metadata"] = e.metadata;
  return j;
}

Experiment experiment_from_json(const nlohmann::json& j) {
  try {
    Experiment e;
    for (const auto& it : j.at("items")) {
      EvalItem item;
      item.item_id = it.at("item_id").get<std::string>();
      item.base_id = it.at("base_id").get<std::string>();
      item.context = it.at("context").get<std::string>();
      item.continuation = it.at("continuation").get<std::string>();
      const auto origin = it.at("origin").get<std::string>();
      if (origin != "authentic" && origin != "synthetic") throw DataError("unknown origin: " + origin);
      item.origin = origin == "authentic" ? Origin::Authentic : Origin::Synthetic;
      item.list = list_from_string(it.at("list").get<std::string>());
      if (it.contains("model_id") && it["model_id"].is_string()) item.model_id = it["model_id"].get<std::string>();
      if (it.contains("strategy")) item.strategy = strategy_from_string(it["strategy"].get<std::string>());
      if (it.contains("meta")) item.meta = ordered_json::parse(it["meta"].dump());
      e.items.push_back(std::move(item));
    }
    e.list_a = j.at("lists").at("A").get<std::vector<std::string>>();
    e.list_b = j.at("lists").at("B").get<std::vector<std::string>>();
    if (j.contains("evaluators")) {
      for (const auto& [id, l] : j["evaluators"].items()) e.evaluators[id] = list_from_string(l.get<std::string>());
    }
    if (j.contains("metadata")) e.metadata = ordered_json::parse(j["metadata"].dump());
    for (auto l : {ListId::A, ListId::B}) {
      for (const auto& id : e.list(l)) {
        const auto* item = e.find(id);
        if (!item || item->list != l) throw DataError("list " + std::string(to_string(l)) + " refers to '" + id + "'");
      }
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed experiment bundle: ") + ex.what());
  }
}

ordered_json blinded_list(const Experiment& e, ListId list) {
  ordered_json out = ordered_json::array();
  const auto& ids = e.list(list);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto* item = e.find(ids[i]);
    out.push_back({{"item_id", item->item_id},
                   {"context", item->context},
                   {"continuation", item->continuation},
                   {"position", i + 1},
                   {"total", ids.size()}});
  }
  return out;
}

// ---------------------------------------------------------------- annotations

std::string_view to_string(Category c) {
  switch (c) {
    case Category::Form: return "form";
    case Category::Content: return "content";
    case Category::Register: return "register";
    case Category::Repetitive: return "repetitive";
    case Category::Inappropriate: return "inappropriate";
    case Category::Factual: return "factual";
  }
  return "unknown";
}

ordered_json to_json(const Annotation& a) {
  ordered_json flags = ordered_json::object();
  for (auto c : kCategories) flags[std::string(to_string(c))] = a.flag(c);
  return {{"item_id", a.item_id}, {"evaluator_id", a.evaluator_id}, {"flags", flags}, {"timestamp", a.timestamp}};
}

Annotation annotation_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("annotation must be a JSON object");
  Annotation a;
  try {
    a.item_id = j.at("item_id").get<std::string>();
    a.evaluator_id = j.at("evaluator_id").get<std::string>();
    if (a.item_id.empty() || a.evaluator_id.empty()) throw DataError("item_id and evaluator_id must be non-empty");
    const auto& flags = j.contains("flags") ? j["flags"] : j;
    for (auto c : kCategories) {
      const auto& v = flags.at(std::string(to_string(c)));
      bool value = false;
      if (v.is_boolean()) {
        value = v.get<bool>();
      } else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) {
        value = v.get<int>() == 1;
      } else {
        throw DataError("flag '" + std::string(to_string(c)) + "' must be boolean or 0/1");
      }
      a.flags[static_cast<std::size_t>(c)] = value;
    }
    if (j.contains("timestamp") && j["timestamp"].is_string()) a.timestamp = j["timestamp"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed annotation: ") + e.what());
  }
  return a;
}

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string annotations_csv(std::span<const Annotation> annotations) {
  std::string out(kAnnotationCsvHeader);
  out += '\n';
  for (const auto& a : annotations) {
    out += csv_field(a.item_id) + ',' + csv_field(a.evaluator_id);
    for (auto c : kCategories) out += a.flag(c) ? ",1" : ",0";
    out += ',' + csv_field(a.timestamp) + '\n';
  }
  return out;
}

std::vector<Annotation> annotations_from_csv(std::string_view csv) {
  auto rows = parse_csv(csv);
  if (rows.empty()) return {};
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  if (header != kAnnotationCsvHeader) throw DataError("unexpected annotation CSV header");
  std::vector<Annotation> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 9) throw DataError("annotation CSV row " + std::to_string(r + 1) + " has the wrong field count");
    Annotation a;
    a.item_id = row[0];
    a.evaluator_id = row[1];
    for (std::size_t c = 0; c < 6; ++c) {
      if (row[2 + c] != "0" && row[2 + c] != "1") throw DataError("annotation flags must be 0 or 1");
      a.flags[c] = row[2 + c] == "1";
    }
    a.timestamp = row[8];
    out.push_back(std::move(a));
  }
  return out;
}

AnnotationStore::AnnotationStore(std::filesystem::path log_path) : log_path_(std::move(log_path)) {
  if (!std::filesystem::exists(*log_path_)) return;
  std::ifstream in(*log_path_);
  if (!in) throw std::runtime_error("cannot read annotation log: " + log_path_->string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError("corrupt line in annotation log: " + log_path_->string());
    auto a = annotation_from_json(j);
    if (keys_.emplace(a.item_id, a.evaluator_id).second) annotations_.push_back(std::move(a));
  }
}

AnnotationStore::Status AnnotationStore::submit(const Annotation& a) {
  std::lock_guard lock(mutex_);
  if (keys_.contains({a.item_id, a.evaluator_id})) return Status::Duplicate;
  if (log_path_) {
    std::ofstream out(*log_path_, std::ios::app);
    out << to_json(a).dump() << '\n';
    out.flush();
    if (!out) throw std::runtime_error("cannot append to annotation log: " + log_path_->string());
  }
  keys_.emplace(a.item_id, a.evaluator_id);
  annotations_.push_back(a);
  return Status::Accepted;
}

std::vector<Annotation> AnnotationStore::snapshot() const {
  std::lock_guard lock(mutex_);
  return annotations_;
}

std::size_t AnnotationStore::count_for(std::string_view evaluator) const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count_if(annotations_.begin(), annotations_.end(),
                                                [&](const Annotation& a) { return a.evaluator_id == evaluator; }));
}

// ---------------------------------------------------------------- aggregation

ErrorReport aggregate(std::span<const Annotation> annotations, std::span<const EvalItem> items) {
  std::map<std::string, const EvalItem*> by_id;
  std::set<std::string> models;
  for (const auto& it : items) {
    by_id[it.item_id] = &it;
    if (it.origin == Origin::Synthetic) models.insert(it.model_id);
  }
  std::vector<std::string> conditions{"authentic"};
  conditions.insert(conditions.end(), models.begin(), models.end());
  auto condition_of = [](const EvalItem& it) { return it.origin == Origin::Authentic ? std::string("authentic") : it.model_id; };

  std::set<std::pair<std::string, std::string>> seen;
  // per item: judgments and per-category "any evaluator flagged"
  std::map<std::string, std::pair<std::size_t, std::array<bool, 6>>> per_item;
  ErrorReport report;
  std::map<std::string, ConditionReport*> index;
  report.conditions.reserve(conditions.size());
  for (const auto& c : conditions) {
    report.conditions.push_back({c, 0, 0, {}});
    index[c] = &report.conditions.back();
  }
  for (const auto& it : items) ++index[condition_of(it)]->items;

  for (const auto& a : annotations) {
    auto found = by_id.find(a.item_id);
    if (found == by_id.end()) throw DataError("annotation refers to unknown item '" + a.item_id + "'");
    if (!seen.emplace(a.item_id, a.evaluator_id).second) {
      throw DataError("duplicate annotation for item '" + a.item_id + "' by '" + a.evaluator_id + "'");
    }
    auto& cond = *index[condition_of(*found->second)];
    ++cond.judgments;
    auto& [n, any] = per_item[a.item_id];
    ++n;
    for (std::size_t c = 0; c < 6; ++c) {
      ++cond.cells[c].judgments;
      if (a.flags[c]) {
        ++cond.cells[c].flagged;
        any[c] = true;
      }
    }
  }
  for (const auto& [item_id, entry] : per_item) {
    auto& cond = *index[condition_of(*by_id[item_id])];
    for (std::size_t c = 0; c < 6; ++c) {
      ++cond.cells[c].items;
      if (entry.second[c]) ++cond.cells[c].items_flagged;
    }
  }
  for (auto& cond : report.conditions) {
    for (auto& cell : cond.cells) {
      cell.percent = cell.judgments ? 100.0 * static_cast<double>(cell.flagged) / static_cast<double>(cell.judgments) : 0.0;
      cell.item_percent =
          cell.items ? 100.0 * static_cast<double>(cell.items_flagged) / static_cast<double>(cell.items) : 0.0;
    }
  }
  return report;
}

ordered_json to_json(const ErrorReport& r) {
  ordered_json out;
  out["metric"] = "judgment_level";
  out["conditions"] = ordered_json::array();
  for (const auto& c : r.conditions) {
    ordered_json cj;
    cj["condition"] = c.condition;
    cj["items"] = c.items;
    cj["judgments"] = c.judgments;
    ordered_json cats = ordered_json::object();
    for (std::size_t k = 0; k < 6; ++k) {
      const auto& cell = c.cells[k];
      cats[std::string(to_string(kCategories[k]))] = {{"percent", cell.percent},
                                                       {"flagged", cell.flagged},
                                                       {"judgments", cell.judgments},
                                                       {"item_percent", cell.item_percent},
                                                       {"items_flagged", cell.items_flagged},
                                                       {"items_judged", cell.items}};
    }
    cj["categories"] = std::move(cats);
    out["conditions"].push_back(std::move(cj));
  }
  return out;
}

std::string report_csv(const ErrorReport& r) {
  std::ostringstream out;
  out << "condition,category,percent,flagged,judgments,item_percent\n";
  char buf[32];
  for (const auto& c : r.conditions) {
    for (std::size_t k = 0; k < 6; ++k) {
      const auto& cell = c.cells[k];
      out << csv_field(c.condition) << ',' << to_string(kCategories[k]) << ',';
      std::snprintf(buf, sizeof buf, "%.1f", cell.percent);
      out << buf << ',' << cell.flagged << ',' << cell.judgments << ',';
      std::snprintf(buf, sizeof buf, "%.1f", cell.item_percent);
      out << buf << '\n';
    }
  }
  return out.str();
}

}  // namespace ltx::humeval
