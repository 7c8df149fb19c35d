#include "ltx/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <queue>
#include <stdexcept>
#include <unordered_set>

namespace ltx::tokenizer {

namespace {

std::uint64_t pair_key(TokenId left, TokenId right) {
  return (static_cast<std::uint64_t>(left) << 32) | right;
}
TokenId key_left(std::uint64_t key) { return static_cast<TokenId>(key >> 32); }
TokenId key_right(std::uint64_t key) { return static_cast<TokenId>(key & 0xFFFFFFFFu); }

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

struct ByteTables {
  std::array<std::uint32_t, 256> to_cp{};
  std::unordered_map<std::uint32_t, unsigned char> from_cp;

  ByteTables() {
    std::vector<bool> printable(256, false);
    for (int b = '!'; b <= '~'; ++b) printable[b] = true;
    for (int b = 0xA1; b <= 0xAC; ++b) printable[b] = true;
    for (int b = 0xAE; b <= 0xFF; ++b) printable[b] = true;
    std::uint32_t next = 256;
    for (int b = 0; b < 256; ++b) {
      to_cp[b] = printable[b] ? static_cast<std::uint32_t>(b) : next++;
      from_cp[to_cp[b]] = static_cast<unsigned char>(b);
    }
  }
};

const ByteTables& byte_tables() {
  static const ByteTables t;
  return t;
}

// Merges every non-overlapping occurrence of (left, right), scanning left to right.
bool merge_in_place(std::vector<TokenId>& syms, TokenId left, TokenId right, TokenId out) {
  bool changed = false;
  std::size_t w = 0;
  for (std::size_t r = 0; r < syms.size(); ++r) {
    if (r + 1 < syms.size() && syms[r] == left && syms[r + 1] == right) {
      syms[w++] = out;
      ++r;
      changed = true;
    } else {
      syms[w++] = syms[r];
    }
  }
  syms.resize(w);
  return changed;
}

}  // namespace

// ---------------------------------------------------------------- Vocab

Vocab::Vocab(std::vector<std::string> special_tokens) {
  for (int b = 0; b < 256; ++b) add(std::string(1, static_cast<char>(b)));
  for (auto& s : special_tokens) {
    if (token_to_id_.contains(s)) throw std::invalid_argument("special token collides with a byte token");
    add(s);
  }
  special_ = std::move(special_tokens);
}

TokenId Vocab::add(std::string token) {
  const auto id = static_cast<TokenId>(id_to_token_.size());
  auto [it, inserted] = token_to_id_.emplace(token, id);
  if (!inserted) throw DataError("duplicate token in vocabulary");
  id_to_token_.push_back(std::move(token));
  return id;
}

void Vocab::add_merge(const std::string& left, const std::string& right) {
  const auto l = find(left);
  const auto r = find(right);
  if (!l || !r) throw DataError("merge refers to unknown token");
  const auto out = add(left + right);
  const auto rank = merges_.size();
  merges_.push_back({left, right, rank});
  merge_pairs_.emplace_back(*l, *r);
  merge_index_[pair_key(*l, *r)] = {rank, out};
}

Vocab Vocab::from_merges(std::span<const std::pair<std::string, std::string>> merges,
                         std::vector<std::string> special_tokens) {
  Vocab v;
  for (const auto& [l, r] : merges) v.add_merge(l, r);
  for (auto& s : special_tokens) v.add(s);
  v.special_ = std::move(special_tokens);
  return v;
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= id_to_token_.size()) throw std::out_of_range("token id out of range: " + std::to_string(id));
  return id_to_token_[id];
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

bool Vocab::is_special(TokenId id) const {
  return id < id_to_token_.size() && id >= id_to_token_.size() - special_.size();
}

std::optional<Vocab::MergeEntry> Vocab::merge_of(TokenId left, TokenId right) const {
  auto it = merge_index_.find(pair_key(left, right));
  if (it == merge_index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------- training

std::vector<std::string_view> chunk_text(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const bool space = is_space(text[i]);
    const auto start = i;
    while (i < text.size() && is_space(text[i]) == space) ++i;
    out.push_back(text.substr(start, i - start));
  }
  return out;
}

Vocab train_bpe(std::span<const corpus::Document> corpus, const TokenizerTrainConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("cannot train a tokenizer on an empty corpus");
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& doc : corpus) {
    for (auto chunk : chunk_text(doc.text)) ++counts[std::string(chunk)];
  }
  return train_bpe(counts, cfg);
}

Vocab train_bpe(const std::unordered_map<std::string, std::uint64_t>& chunk_counts,
                const TokenizerTrainConfig& cfg) {
  const auto base = 256 + cfg.special_tokens.size();
  if (cfg.vocab_size < base || cfg.vocab_size < 257) {
    throw std::invalid_argument("vocab_size must be at least 256 + number of special tokens");
  }
  const auto target_merges = cfg.vocab_size - base;

  std::vector<std::string> tokens;
  tokens.reserve(256 + target_merges);
  for (int b = 0; b < 256; ++b) tokens.emplace_back(1, static_cast<char>(b));
  std::unordered_set<std::string> existing(tokens.begin(), tokens.end());
  existing.insert(cfg.special_tokens.begin(), cfg.special_tokens.end());

  struct Word {
    std::vector<TokenId> syms;
    std::uint64_t freq;
  };
  std::vector<std::pair<std::string, std::uint64_t>> sorted(chunk_counts.begin(), chunk_counts.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<Word> words;
  words.reserve(sorted.size());
  for (const auto& [chunk, freq] : sorted) {
    Word w{{}, freq};
    for (unsigned char c : chunk) w.syms.push_back(c);
    words.push_back(std::move(w));
  }

  std::unordered_map<std::uint64_t, std::int64_t> pair_counts;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> where;
  for (std::uint32_t w = 0; w < words.size(); ++w) {
    const auto& s = words[w].syms;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      const auto k = pair_key(s[i], s[i + 1]);
      pair_counts[k] += static_cast<std::int64_t>(words[w].freq);
      auto& list = where[k];
      if (list.empty() || list.back() != w) list.push_back(w);
    }
  }

  struct Candidate {
    std::int64_t count;
    std::uint64_t key;
  };
  // Highest count first; ties go to the lexicographically smallest (left, right).
  auto lower_priority = [&tokens](const Candidate& a, const Candidate& b) {
    if (a.count != b.count) return a.count < b.count;
    const auto& al = tokens[key_left(a.key)];
    const auto& bl = tokens[key_left(b.key)];
    if (al != bl) return al > bl;
    return tokens[key_right(a.key)] > tokens[key_right(b.key)];
  };
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(lower_priority)> heap(lower_priority);
  for (const auto& [k, c] : pair_counts) heap.push({c, k});

  std::vector<std::pair<std::string, std::string>> merges;
  std::unordered_set<std::uint64_t> banned;
  while (merges.size() < target_merges && !heap.empty()) {
    const auto top = heap.top();
    heap.pop();
    auto it = pair_counts.find(top.key);
    if (it == pair_counts.end() || it->second != top.count || top.count <= 0 || banned.contains(top.key)) continue;

    const auto left = key_left(top.key);
    const auto right = key_right(top.key);
    auto merged = tokens[left] + tokens[right];
    if (existing.contains(merged)) {
      banned.insert(top.key);
      continue;
    }
    const auto out = static_cast<TokenId>(tokens.size());
    existing.insert(merged);
    tokens.push_back(std::move(merged));
    merges.emplace_back(tokens[left], tokens[right]);

    auto affected = std::move(where[top.key]);
    where.erase(top.key);
    std::sort(affected.begin(), affected.end());
    affected.erase(std::unique(affected.begin(), affected.end()), affected.end());

    std::unordered_map<std::uint64_t, std::int64_t> delta;
    for (auto w : affected) {
      auto& word = words[w];
      auto updated = word.syms;
      if (!merge_in_place(updated, left, right, out)) continue;
      const auto f = static_cast<std::int64_t>(word.freq);
      for (std::size_t i = 0; i + 1 < word.syms.size(); ++i) delta[pair_key(word.syms[i], word.syms[i + 1])] -= f;
      for (std::size_t i = 0; i + 1 < updated.size(); ++i) {
        const auto k = pair_key(updated[i], updated[i + 1]);
        delta[k] += f;
        if (updated[i] == out || updated[i + 1] == out) {
          auto& list = where[k];
          if (list.empty() || list.back() != w) list.push_back(w);
        }
      }
      word.syms = std::move(updated);
    }
    for (const auto& [k, d] : delta) {
      if (d == 0) continue;
      auto& c = pair_counts[k];
      c += d;
      if (c > 0 && !banned.contains(k)) heap.push({c, k});
    }
  }

  if (merges.size() < target_merges) {
    log_warning("corpus supports only " + std::to_string(merges.size()) + " merges; vocabulary has " +
                std::to_string(base + merges.size()) + " of " + std::to_string(cfg.vocab_size) + " requested tokens");
  }
  return Vocab::from_merges(merges, cfg.special_tokens);
}

// ---------------------------------------------------------------- encode / decode

std::vector<TokenId> encode(const Vocab& vocab, std::string_view text) {
  std::vector<TokenId> out;
  out.reserve(text.size());
  std::vector<TokenId> syms;
  for (auto chunk : chunk_text(text)) {
    syms.assign(chunk.begin(), chunk.end());
    for (auto& s : syms) s = static_cast<unsigned char>(s);
    while (syms.size() > 1) {
      std::optional<Vocab::MergeEntry> best;
      std::size_t best_pos = 0;
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
        auto m = vocab.merge_of(syms[i], syms[i + 1]);
        if (m && (!best || m->rank < best->rank)) {
          best = m;
          best_pos = i;
        }
      }
      if (!best) break;
      merge_in_place(syms, syms[best_pos], syms[best_pos + 1], best->output);
    }
    out.insert(out.end(), syms.begin(), syms.end());
  }
  return out;
}

std::string decode(const Vocab& vocab, std::span<const TokenId> ids) {
  std::string out;
  for (auto id : ids) out += vocab.token(id);
  return out;
}

DecodedText decode_text(const Vocab& vocab, std::span<const TokenId> ids) {
  DecodedText d{decode(vocab, ids), 0};
  d.replaced = sanitize_utf8(d.text);
  return d;
}

double fertility(const Vocab& vocab, std::span<const corpus::Document> corpus) {
  std::size_t words = 0;
  std::size_t tokens = 0;
  for (const auto& doc : corpus) {
    for (auto w : corpus::whitespace_tokens(doc.text)) {
      ++words;
      tokens += encode(vocab, w).size();
    }
  }
  if (words == 0) throw std::invalid_argument("fertility needs at least one word");
  return static_cast<double>(tokens) / static_cast<double>(words);
}

// ---------------------------------------------------------------- file format

std::string bytes_to_display(std::string_view bytes) {
  const auto& t = byte_tables();
  std::string out;
  for (unsigned char b : bytes) append_utf8(out, t.to_cp[b]);
  return out;
}

std::string display_to_bytes(std::string_view display) {
  const auto& t = byte_tables();
  std::string out;
  for (std::size_t i = 0; i < display.size();) {
    const auto b0 = static_cast<unsigned char>(display[i]);
    std::uint32_t cp = 0;
    std::size_t len = 1;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0 && i + 1 < display.size()) {
      cp = ((b0 & 0x1Fu) << 6) | (static_cast<unsigned char>(display[i + 1]) & 0x3Fu);
      len = 2;
    } else {
      throw DataError("token string outside the byte display alphabet");
    }
    auto it = t.from_cp.find(cp);
    if (it == t.from_cp.end()) throw DataError("token string outside the byte display alphabet");
    out += static_cast<char>(it->second);
    i += len;
  }
  return out;
}

nlohmann::ordered_json to_json(const Vocab& vocab) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["byte_level"] = true;
  j["special_tokens"] = vocab.special_tokens();
  auto merges = nlohmann::ordered_json::array();
  for (const auto& m : vocab.merges()) merges.push_back({bytes_to_display(m.left), bytes_to_display(m.right)});
  j["merges"] = std::move(merges);
  nlohmann::ordered_json v = nlohmann::ordered_json::object();
  for (TokenId id = 0; id < vocab.size(); ++id) {
    v[vocab.is_special(id) ? vocab.token(id) : bytes_to_display(vocab.token(id))] = id;
  }
  j["vocab"] = std::move(v);
  return j;
}

Vocab vocab_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1) throw DataError("unsupported tokenizer version");
    if (!j.at("byte_level").get<bool>()) throw DataError("only byte-level tokenizers are supported");
    auto specials = j.at("special_tokens").get<std::vector<std::string>>();
    std::vector<std::pair<std::string, std::string>> merges;
    for (const auto& m : j.at("merges")) {
      if (!m.is_array() || m.size() != 2) throw DataError("malformed merge entry");
      merges.emplace_back(display_to_bytes(m[0].get<std::string>()), display_to_bytes(m[1].get<std::string>()));
    }
    auto vocab = Vocab::from_merges(merges, specials);
    const auto& v = j.at("vocab");
    if (v.size() != vocab.size()) throw DataError("vocab size does not match merges and special tokens");
    for (const auto& [key, id] : v.items()) {
      const auto token_id = id.get<TokenId>();
      if (token_id >= vocab.size()) throw DataError("vocab id out of range");
      const auto expected = vocab.is_special(token_id) ? vocab.token(token_id) : bytes_to_display(vocab.token(token_id));
      if (expected != key) throw DataError("vocab entry '" + key + "' disagrees with merge order");
    }
    return vocab;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed tokenizer file: ") + e.what());
  }
}

std::string serialize(const Vocab& vocab) { return to_json(vocab).dump(1) + "\n"; }

void save(const Vocab& vocab, const std::filesystem::path& path) { write_file_atomic(path, serialize(vocab)); }

Vocab load(const std::filesystem::path& path) {
  auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw DataError("tokenizer file is not valid JSON: " + path.string());
  return vocab_from_json(j);
}

}  // namespace ltx::tokenizer
