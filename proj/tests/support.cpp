#include "support.hpp"

#include <array>
#include <map>
#include <random>
#include <set>

namespace ltx::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::random_device rd;
  const auto base = fs::temp_directory_path();
  for (;;) {
    auto candidate = base / ("ltx-test-" + std::to_string(rd()) + std::to_string(rd()));
    if (fs::create_directory(candidate)) {
      path_ = candidate;
      break;
    }
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path data_path(const std::string& name) { return fs::path(LTX_TEST_DATA) / name; }

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

struct Lexicon {
  std::vector<std::string> det, noun, verb, adj;
};

const Lexicon& lexicon(char language) {
  static const Lexicon a{{"el", "la", "un", "una"},
                         {"casa", "perro", "libro", "mar", "sol", "camino", "puerta", "ciudad"},
                         {"ve", "tiene", "lleva", "busca", "quiere"},
                         {"grande", "nuevo", "rojo", "viejo", "blanco"}};
  static const Lexicon b{{"o", "a", "un", "unha"},
                         {"casa", "can", "libro", "mar", "sol", "camiño", "porta", "cidade"},
                         {"ve", "ten", "leva", "procura", "quere"},
                         {"grande", "novo", "vermello", "vello", "branco"}};
  return language == 'A' ? a : b;
}

const std::string& pick(const std::vector<std::string>& v, std::uint64_t& state) {
  return v[splitmix(state) % v.size()];
}

}  // namespace

std::string synthetic_sentence(char language, std::uint64_t& state) {
  const auto& lx = lexicon(language);
  std::string s = pick(lx.det, state);
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  s += " " + pick(lx.noun, state) + " " + pick(lx.verb, state) + " " + pick(lx.det, state) + " " +
       pick(lx.adj, state) + " " + pick(lx.noun, state) + ".";
  return s;
}

std::vector<corpus::Document> synthetic_corpus(char language, std::size_t n_docs, std::size_t sentences_per_doc,
                                               std::uint64_t seed, std::string_view genre) {
  std::vector<corpus::Document> docs;
  std::uint64_t state = seed;
  for (std::size_t d = 0; d < n_docs; ++d) {
    corpus::Document doc;
    char id[32];
    std::snprintf(id, sizeof id, "%c-%04zu", language, d);
    doc.id = id;
    doc.genre = std::string(genre);
    for (std::size_t s = 0; s < sentences_per_doc; ++s) {
      if (s) doc.text += ' ';
      doc.text += synthetic_sentence(language, state);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

nn::ModelConfig toy_config(std::size_t vocab_size, bool tied) {
  nn::ModelConfig c;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_model = 8;
  c.d_ff = 32;
  c.vocab_size = vocab_size;
  c.max_seq_len = 16;
  c.tie_embeddings = tied;
  return c;
}

namespace {

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

}  // namespace

std::string random_unicode(std::uint64_t& state, std::size_t max_code_points) {
  static constexpr std::array<std::pair<char32_t, char32_t>, 6> ranges{{{0x20, 0x7E},
                                                                        {0x09, 0x0D},
                                                                        {0xA0, 0x24F},
                                                                        {0x370, 0x4FF},
                                                                        {0x4E00, 0x9FFF},
                                                                        {0x1F300, 0x1FAFF}}};
  const auto n = splitmix(state) % (max_code_points + 1);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [lo, hi] = ranges[splitmix(state) % ranges.size()];
    append_utf8(out, static_cast<char32_t>(lo + splitmix(state) % (hi - lo + 1)));
  }
  return out;
}

}  // namespace ltx::testing

namespace ltx::testing {

std::vector<humeval::BaseText> demo_bases(std::size_t n, std::uint64_t seed) {
  const auto docs = synthetic_corpus('B', n, 12, seed);
  const auto strategies = humeval::assign_strategies(n, seed);
  std::vector<humeval::BaseText> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto split = humeval::split_text(docs[i].text, strategies[i]);
    humeval::BaseText b;
    b.base_id = docs[i].id;
    b.genre = docs[i].genre;
    b.strategy = strategies[i];
    b.context = split.context;
    b.authentic = split.continuation;
    std::uint64_t state = seed + i;
    b.synthetic = " " + synthetic_sentence('B', state);
    if (b.synthetic.size() > b.authentic.size()) b.synthetic.resize(b.authentic.size());
    b.generation.model_id = "toy";
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<std::string> latin_square_violations(const humeval::Experiment& e,
                                                 std::span<const humeval::BaseText> bases) {
  using humeval::ListId;
  using humeval::Origin;
  std::vector<std::string> bad;
  const auto n = bases.size();
  if (e.items.size() != 2 * n) bad.push_back("item count " + std::to_string(e.items.size()));
  std::set<std::string> ids;
  for (const auto& it : e.items) {
    if (!ids.insert(it.item_id).second) bad.push_back("duplicate item id " + it.item_id);
  }
  for (auto l : {ListId::A, ListId::B}) {
    const auto& list = e.list(l);
    if (list.size() != n) bad.push_back("list size " + std::to_string(list.size()));
    std::size_t authentic = 0;
    std::set<std::string> seen_bases;
    for (const auto& id : list) {
      const auto* it = e.find(id);
      if (!it) {
        bad.push_back("list refers to missing item " + id);
        continue;
      }
      if (it->list != l) bad.push_back("item " + id + " filed under the wrong list");
      authentic += it->origin == Origin::Authentic;
      if (!seen_bases.insert(it->base_id).second) bad.push_back("base " + it->base_id + " twice in one list");
    }
    if (2 * authentic != n) bad.push_back("origin balance " + std::to_string(authentic) + " of " + std::to_string(n));
    if (seen_bases.size() != n) bad.push_back("list misses bases");
  }
  std::array<std::size_t, 4> strategy_counts{};
  for (std::size_t i = 0; i < n; ++i) {
    const auto& b = bases[i];
    const humeval::EvalItem* auth = nullptr;
    const humeval::EvalItem* synth = nullptr;
    for (const auto& it : e.items) {
      if (it.base_id != b.base_id) continue;
      (it.origin == Origin::Authentic ? auth : synth) = &it;
    }
    if (!auth || !synth) {
      bad.push_back("base " + b.base_id + " lacks a version");
      continue;
    }
    if (auth->list == synth->list) bad.push_back("base " + b.base_id + " has both versions in one list");
    const auto expected = i % 2 == 0 ? ListId::A : ListId::B;
    if (auth->list != expected) bad.push_back("base " + b.base_id + " authentic version in the wrong list");
    if (auth->context + auth->continuation != b.context + b.authentic) {
      bad.push_back("base " + b.base_id + " does not reconstruct");
    }
    if (synth->context != b.context || synth->continuation != b.synthetic) {
      bad.push_back("base " + b.base_id + " synthetic item altered");
    }
    for (std::size_t s = 0; s < 4; ++s) strategy_counts[s] += humeval::kAllStrategies[s] == auth->strategy;
  }
  if (n % 4 == 0) {
    for (auto c : strategy_counts) {
      if (c != n / 4) bad.push_back("strategy used " + std::to_string(c) + " times");
    }
  }
  return bad;
}

}  // namespace ltx::testing
