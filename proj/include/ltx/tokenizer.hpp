// Byte-level BPE: training, encoding, decoding and the JSON tokenizer file.
//
// Ids 0..255 are the raw bytes, merge outputs follow in rank order, and special
// tokens come last. Text is first cut into chunks (maximal runs of whitespace or
// of non-whitespace bytes); merges never cross a chunk boundary.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ltx/common.hpp"
#include "ltx/corpus.hpp"

namespace ltx::tokenizer {

inline constexpr std::string_view kEndOfText = "<|endoftext|>";
inline constexpr std::size_t kDefaultVocabSize = 50257;

struct MergeRule {
  std::string left;
  std::string right;
  std::size_t rank = 0;
};

struct TokenizerTrainConfig {
  std::size_t vocab_size = kDefaultVocabSize;
  std::vector<std::string> special_tokens{std::string(kEndOfText)};
};

class Vocab {
 public:
  /// Bytes only, plus the given special tokens.
  explicit Vocab(std::vector<std::string> special_tokens = {});

  /// Byte base, then one token per merge (in rank order), then special tokens.
  static Vocab from_merges(std::span<const std::pair<std::string, std::string>> merges,
                           std::vector<std::string> special_tokens);

  std::size_t size() const { return id_to_token_.size(); }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;
  std::span<const std::string> tokens() const { return id_to_token_; }
  const std::vector<MergeRule>& merges() const { return merges_; }
  const std::vector<std::string>& special_tokens() const { return special_; }
  std::optional<TokenId> end_of_text() const { return find(kEndOfText); }
  bool is_special(TokenId id) const;

  /// Rank and output id of the merge (left, right), if any.
  struct MergeEntry {
    std::size_t rank;
    TokenId output;
  };
  std::optional<MergeEntry> merge_of(TokenId left, TokenId right) const;

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.id_to_token_ == b.id_to_token_ && a.special_ == b.special_ && a.merge_pairs_ == b.merge_pairs_;
  }

 private:
  TokenId add(std::string token);
  void add_merge(const std::string& left, const std::string& right);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<MergeRule> merges_;
  std::vector<std::pair<TokenId, TokenId>> merge_pairs_;
  std::unordered_map<std::uint64_t, MergeEntry> merge_index_;
  std::vector<std::string> special_;
};

/// Splits text into whitespace / non-whitespace runs.
std::vector<std::string_view> chunk_text(std::string_view text);

/// Greedy BPE over documents. Returns fewer merges (with a warning) when pairs run out.
Vocab train_bpe(std::span<const corpus::Document> corpus, const TokenizerTrainConfig& cfg);

/// Greedy BPE over pre-counted chunks (e.g. a word frequency table).
Vocab train_bpe(const std::unordered_map<std::string, std::uint64_t>& chunk_counts,
                const TokenizerTrainConfig& cfg);

std::vector<TokenId> encode(const Vocab& vocab, std::string_view text);

/// Exact concatenation of token bytes. Throws std::out_of_range on an unknown id.
std::string decode(const Vocab& vocab, std::span<const TokenId> ids);

struct DecodedText {
  std::string text;         // valid UTF-8
  std::size_t replaced = 0; // invalid sequences replaced by U+FFFD
};

/// decode() followed by UTF-8 repair; `replaced` records the replacement policy outcome.
DecodedText decode_text(const Vocab& vocab, std::span<const TokenId> ids);

/// Mean number of tokens per whitespace word, each word encoded on its own.
double fertility(const Vocab& vocab, std::span<const corpus::Document> corpus);

nlohmann::ordered_json to_json(const Vocab& vocab);
Vocab vocab_from_json(const nlohmann::json& j);

std::string serialize(const Vocab& vocab);
void save(const Vocab& vocab, const std::filesystem::path& path);
Vocab load(const std::filesystem::path& path);

/// Byte <-> printable code point mapping used for token strings in the JSON file.
std::string bytes_to_display(std::string_view bytes);
std::string display_to_bytes(std::string_view display);

}  // namespace ltx::tokenizer
