// Corpus ingestion, perplexity-based cleaning, statistics and held-out splitting.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ltx/common.hpp"

namespace ltx::corpus {

enum class Subcorpus { TransferAgreement, PublicData };

std::string_view to_string(Subcorpus s);
Subcorpus subcorpus_from_string(std::string_view s);

struct Document {
  std::string id;
  Subcorpus subcorpus = Subcorpus::PublicData;
  std::string genre;
  std::string text;
};

nlohmann::ordered_json to_json(const Document& doc);

enum class InputFormat { Jsonl, PlainDir };

struct IngestResult {
  std::vector<Document> documents;  // sorted by id
  std::size_t malformed = 0;
  std::vector<std::string> warnings;
};

/// Reads a JSONL file or a directory of .txt files. Malformed records are skipped
/// and counted; an unreadable path throws.
IngestResult ingest(const std::filesystem::path& path, InputFormat format,
                    Subcorpus dir_subcorpus = Subcorpus::PublicData,
                    std::string_view dir_genre = "unknown");

/// Parses one JSONL record; nullopt when malformed.
std::optional<Document> parse_document(std::string_view line);

/// Whitespace-delimited tokens.
std::vector<std::string_view> whitespace_tokens(std::string_view text);

/// Word n-gram model with additive smoothing, used to score documents.
///
/// p(w | ctx) = (count(ctx, w) + alpha) / (count(ctx) + alpha * V), V = number of
/// distinct training types. Each document is scored with a fresh start-of-text context.
class NgramModel {
 public:
  NgramModel(int order, double alpha);

  void train(std::string_view text);
  void train(std::span<const Document> docs);

  double log_prob(std::span<const std::string_view> context, std::string_view token) const;

  int order() const { return order_; }
  double alpha() const { return alpha_; }
  std::size_t vocab_size() const { return types_.size(); }

 private:
  std::string context_key(std::span<const std::string_view> context) const;

  struct ContextCounts {
    std::uint64_t total = 0;
    std::unordered_map<std::string, std::uint64_t> next;
  };

  int order_;
  double alpha_;
  std::unordered_map<std::string, ContextCounts> counts_;
  std::unordered_map<std::string, std::uint64_t> types_;
};

/// exp of the mean negative log-probability per whitespace token. Throws
/// std::invalid_argument on text without tokens.
double perplexity(std::string_view text, const NgramModel& model);

struct CleanerConfig {
  double ppl_threshold = 0.0;
  std::size_t min_chars = 0;
};

enum class DropReason { TooShort, HighPerplexity, Empty };

std::string_view to_string(DropReason r);

struct CleanDecision {
  bool keep = true;
  DropReason reason = DropReason::TooShort;  // meaningful when !keep
  std::optional<double> perplexity;
};

/// Drop if shorter than min_chars (code points) or perplexity above the threshold.
CleanDecision clean(const Document& doc, const NgramModel& model, const CleanerConfig& cfg);

/// Applies `clean` to every document, in parallel unless deterministic mode is set.
std::vector<CleanDecision> clean_all(std::span<const Document> docs, const NgramModel& model,
                                     const CleanerConfig& cfg);

/// Nearest-rank percentile (in percent, (0,100]) of document perplexities.
double calibrate_threshold(std::span<const Document> sample, const NgramModel& model,
                           double percentile = 95.0);

nlohmann::ordered_json clean_report_line(const Document& doc, const CleanDecision& d);

struct Counts {
  std::uint64_t tokens = 0;
  std::uint64_t documents = 0;

  Counts& operator+=(const Counts& o) {
    tokens += o.tokens;
    documents += o.documents;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

/// Token and document counts per (subcorpus, genre). Genre rows keep first-seen order.
class CorpusStats {
 public:
  void add(Subcorpus sc, std::string_view genre, Counts counts);
  void add(const Document& doc);

  Counts subtotal(Subcorpus sc) const;
  Counts total() const;

  struct Row {
    std::string genre;
    Counts counts;
  };
  const std::vector<Row>& rows(Subcorpus sc) const;

  nlohmann::ordered_json to_json() const;
  /// Text table: one line per genre, subtotal per subcorpus, overall total.
  std::string render_table() const;

 private:
  std::map<Subcorpus, std::vector<Row>> rows_;
};

CorpusStats stats(std::span<const Document> corpus);

/// Statistics from a JSONL file whose lines are either documents or pre-counted
/// rows {"subcorpus", "genre", "tokens", "documents"}.
CorpusStats stats_from_jsonl(const std::filesystem::path& path, std::size_t* malformed = nullptr);

struct Split {
  std::vector<Document> train;
  std::vector<Document> heldout;
};

/// Seeded partition with |heldout| = round(fraction * N).
Split split(std::span<const Document> corpus, double heldout_fraction, std::uint64_t seed);

}  // namespace ltx::corpus
