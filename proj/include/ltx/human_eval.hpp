// Blinded human evaluation of continuations: text selection, counterbalanced
// splitting, authentic vs generated versions in a two-list Latin square, annotation
// storage and error-rate aggregation.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ltx/corpus.hpp"
#include "ltx/model.hpp"
#include "ltx/tokenizer.hpp"

namespace ltx::humeval {

struct SelectionConfig {
  std::size_t n_texts = 60;
  std::size_t min_chars = 250;
  std::size_t max_chars = 1400;

  void validate() const;
};

struct SourceText {
  std::string id;
  std::string genre;
  std::string text;
};

/// Picks n_texts held-out documents within the length bounds (code points) and with
/// at least two sentences, spread evenly over genres: each genre gets n / G texts and
/// the first n mod G genres (sorted by name) one more. Deterministic per seed.
/// Throws DataError naming the first quota that cannot be met.
std::vector<SourceText> select_texts(std::span<const corpus::Document> heldout, const SelectionConfig& cfg,
                                     std::uint64_t seed);

double mean_length(std::span<const SourceText> texts);

enum class SplitPosition { Begin, Middle };
enum class SplitPoint { MidSentence, EndSentence };

struct SplitStrategy {
  SplitPosition position;
  SplitPoint point;
  friend bool operator==(const SplitStrategy&, const SplitStrategy&) = default;
};

inline constexpr std::array<SplitStrategy, 4> kAllStrategies{{
    {SplitPosition::Begin, SplitPoint::MidSentence},
    {SplitPosition::Begin, SplitPoint::EndSentence},
    {SplitPosition::Middle, SplitPoint::MidSentence},
    {SplitPosition::Middle, SplitPoint::EndSentence},
}};

std::string to_string(SplitStrategy s);
SplitStrategy strategy_from_string(std::string_view s);

/// Sentence spans [begin, end) in bytes. A sentence ends after a run of . ! ? or …
/// followed by any closing quotes or brackets; leading whitespace is excluded and a
/// trailing fragment without terminator counts as a sentence.
std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(std::string_view text);

struct SplitText {
  std::string context;
  std::string continuation;
};

/// Begin splits after sentence 1 (EndSentence) or after the first floor(w/2) words of
/// sentence 2 (MidSentence); Middle uses sentence ceil(S/2) and ceil(S/2)+1 instead.
/// The whitespace at the boundary starts the continuation, so context + continuation
/// == text. Throws std::invalid_argument on single-sentence text.
SplitText split_text(std::string_view text, SplitStrategy strategy);

/// Counterbalanced assignment: each strategy n/4 times in seeded order (n % 4 == 0).
std::vector<SplitStrategy> assign_strategies(std::size_t n, std::uint64_t seed);

struct GenerationMeta {
  std::string model_id;
  nn::DecodeConfig decode;
};

/// Samples a continuation of `context` and truncates it at the last token boundary
/// whose decoded length (code points) does not exceed `max_chars`.
template <typename Scalar>
std::string generate_continuation(const nn::Model<Scalar>& model, const tokenizer::Vocab& vocab,
                                  std::string_view context, std::size_t max_chars, const nn::DecodeConfig& cfg);

enum class Origin { Authentic, Synthetic };
enum class ListId { A, B };

std::string_view to_string(Origin o);
std::string_view to_string(ListId l);
ListId list_from_string(std::string_view s);

struct BaseText {
  std::string base_id;
  std::string genre;
  SplitStrategy strategy;
  std::string context;
  std::string authentic;
  std::string synthetic;
  GenerationMeta generation;
};

struct EvalItem {
  std::string item_id;
  std::string base_id;
  std::string context;
  std::string continuation;
  Origin origin = Origin::Authentic;
  ListId list = ListId::A;
  std::string model_id;  // synthetic only
  SplitStrategy strategy{SplitPosition::Begin, SplitPoint::EndSentence};
  nlohmann::ordered_json meta;  // decode settings for synthetic items
};

struct Experiment {
  std::vector<EvalItem> items;
  std::vector<std::string> list_a;  // item ids in presentation order
  std::vector<std::string> list_b;
  std::map<std::string, ListId> evaluators;
  nlohmann::ordered_json metadata;

  const std::vector<std::string>& list(ListId l) const { return l == ListId::A ? list_a : list_b; }
  const EvalItem* find(std::string_view item_id) const;
};

/// Two lists from bases with one authentic and one synthetic version each: base i
/// puts its authentic version in list A when i is even, in B otherwise, and the
/// synthetic version in the other list. Item ids are assigned after a seeded shuffle
/// of each list so they carry no origin information.
Experiment build_latin_square(std::span<const BaseText> bases, std::uint64_t seed);

/// Seeded split of an even number of evaluators into two equal groups (A, B).
std::map<std::string, ListId> assign_evaluators(std::span<const std::string> evaluators, std::uint64_t seed);

nlohmann::ordered_json to_json(const Experiment& e);
Experiment experiment_from_json(const nlohmann::json& j);

/// Evaluator-facing payload: item_id, context, continuation, position, total only.
nlohmann::ordered_json blinded_list(const Experiment& e, ListId list);

enum class Category { Form, Content, Register, Repetitive, Inappropriate, Factual };
inline constexpr std::array<Category, 6> kCategories{Category::Form,          Category::Content,
                                                     Category::Register,      Category::Repetitive,
                                                     Category::Inappropriate, Category::Factual};
std::string_view to_string(Category c);

struct Annotation {
  std::string item_id;
  std::string evaluator_id;
  std::array<bool, 6> flags{};  // indexed like kCategories
  std::string timestamp;

  bool flag(Category c) const { return flags[static_cast<std::size_t>(c)]; }
};

nlohmann::ordered_json to_json(const Annotation& a);
/// Accepts either {"flags": {form: bool, ...}} or the six keys at top level (bool or 0/1).
Annotation annotation_from_json(const nlohmann::json& j);

inline constexpr std::string_view kAnnotationCsvHeader =
    "item_id,evaluator_id,form,content,register,repetitive,inappropriate,factual,timestamp";
std::string annotations_csv(std::span<const Annotation> annotations);
std::vector<Annotation> annotations_from_csv(std::string_view csv);

/// Thread-safe annotation store over an optional append-only JSONL log. The first
/// submission for an (item, evaluator) pair wins.
class AnnotationStore {
 public:
  AnnotationStore() = default;
  /// Replays an existing log (duplicates in the log are ignored) and appends to it.
  explicit AnnotationStore(std::filesystem::path log_path);

  enum class Status { Accepted, Duplicate };
  Status submit(const Annotation& a);

  std::vector<Annotation> snapshot() const;
  std::size_t count_for(std::string_view evaluator) const;

 private:
  mutable std::mutex mutex_;
  std::optional<std::filesystem::path> log_path_;
  std::vector<Annotation> annotations_;
  std::set<std::pair<std::string, std::string>> keys_;
};

struct CategoryCell {
  std::size_t judgments = 0;
  std::size_t flagged = 0;
  double percent = 0.0;  // judgment level
  std::size_t items = 0;
  std::size_t items_flagged = 0;
  double item_percent = 0.0;  // any evaluator flagged the item
};

struct ConditionReport {
  std::string condition;  // "authentic" or a model id
  std::size_t items = 0;
  std::size_t judgments = 0;
  std::array<CategoryCell, 6> cells{};
};

struct ErrorReport {
  std::vector<ConditionReport> conditions;
};

/// Throws DataError for annotations of unknown items or duplicate (item, evaluator) pairs.
ErrorReport aggregate(std::span<const Annotation> annotations, std::span<const EvalItem> items);

nlohmann::ordered_json to_json(const ErrorReport& r);
/// condition,category,percent,flagged,judgments,item_percent (one row per cell).
std::string report_csv(const ErrorReport& r);

}  // namespace ltx::humeval
