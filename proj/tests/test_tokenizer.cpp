#include <doctest.h>

#include <unordered_map>

#include "ltx/common.hpp"
#include "ltx/tokenizer.hpp"
#include "support.hpp"

using namespace ltx;
using namespace ltx::tokenizer;

namespace {

const std::unordered_map<std::string, std::uint64_t> kClassic{{"low", 5}, {"lower", 2}, {"newest", 6}, {"widest", 3}};

// Pair-recounting reference run of the classic corpus.
const std::vector<std::pair<std::string, std::string>> kClassicMerges{
    {"e", "s"}, {"es", "t"}, {"l", "o"},     {"lo", "w"},   {"e", "w"},
    {"ew", "est"}, {"n", "ewest"}, {"d", "est"}, {"i", "dest"}, {"w", "idest"}};

std::vector<std::string> strings(const Vocab& v, const std::vector<TokenId>& ids) {
  std::vector<std::string> out;
  for (auto id : ids) out.push_back(v.token(id));
  return out;
}

}  // namespace

TEST_SUITE("tokenizer") {
  TEST_CASE("byte base and special tokens") {
    const Vocab v({std::string(kEndOfText)});
    CHECK(v.size() == 257);
    CHECK(v.token(0x41) == "A");
    CHECK(v.end_of_text() == TokenId{256});
    CHECK(v.is_special(256));
    CHECK_FALSE(v.is_special(0x41));
    CHECK_THROWS_AS(v.token(257), std::out_of_range);
  }

  TEST_CASE("chunks alternate between whitespace and non-whitespace runs") {
    const auto c = chunk_text("ola  mundo\n!");
    REQUIRE(c.size() == 5);
    CHECK(c[0] == "ola");
    CHECK(c[1] == "  ");
    CHECK(c[2] == "mundo");
    CHECK(c[3] == "\n");
    CHECK(c[4] == "!");
    CHECK(chunk_text("").empty());
  }

  TEST_CASE("single merge on a one-pair corpus") {
    const auto v = train_bpe(std::unordered_map<std::string, std::uint64_t>{{"aaaa", 3}}, {258, {std::string(kEndOfText)}});
    REQUIRE(v.merges().size() == 1);
    CHECK(v.merges()[0].left == "a");
    CHECK(v.merges()[0].right == "a");
    CHECK(v.size() == 258);
    CHECK(v.token(256) == "aa");
    CHECK(v.token(257) == kEndOfText);
  }

  TEST_CASE("classic corpus reproduces the reference merge list") {
    const auto v = train_bpe(kClassic, {256 + kClassicMerges.size() + 1, {std::string(kEndOfText)}});
    REQUIRE(v.merges().size() == kClassicMerges.size());
    for (std::size_t i = 0; i < kClassicMerges.size(); ++i) {
      CAPTURE(i);
      CHECK(v.merges()[i].left == kClassicMerges[i].first);
      CHECK(v.merges()[i].right == kClassicMerges[i].second);
      CHECK(v.merges()[i].rank == i);
    }
  }

  TEST_CASE("encode applies merges in rank order") {
    const auto v = Vocab::from_merges(kClassicMerges, {std::string(kEndOfText)});
    const auto ids = encode(v, "lowest");
    CHECK(ids == std::vector<TokenId>{259, 257});  // "low" (rank 3), "est" (rank 1)
    CHECK(strings(v, ids) == std::vector<std::string>{"low", "est"});
    CHECK(strings(v, encode(v, "newest widest")) == std::vector<std::string>{"newest", " ", "widest"});
    CHECK(encode(v, "").empty());
    CHECK(decode(v, std::vector<TokenId>{}).empty());
    CHECK(decode(v, std::vector<TokenId>{0x41}) == "A");
  }

  TEST_CASE("training stops early with a warning when pairs run out") {
    const auto v = train_bpe(std::unordered_map<std::string, std::uint64_t>{{"ab", 1}}, {1000, {}});
    CHECK(v.size() == 257);
  }

  TEST_CASE("requested size below the byte base is rejected") {
    CHECK_THROWS(train_bpe(kClassic, {100, {std::string(kEndOfText)}}));
  }

  TEST_CASE("round trip over random Unicode strings") {
    const auto docs = testing::synthetic_corpus('B', 40, 3, 2);
    const auto v = train_bpe(docs, {400, {std::string(kEndOfText)}});
    std::uint64_t state = 99;
    for (int i = 0; i < 1000; ++i) {
      const auto s = testing::random_unicode(state, 40);
      const auto ids = encode(v, s);
      REQUIRE(decode(v, ids) == s);
    }
  }

  TEST_CASE("special token text is encoded as plain bytes") {
    const Vocab v({std::string(kEndOfText)});
    const auto ids = encode(v, kEndOfText);
    CHECK(ids.size() == kEndOfText.size());
    CHECK(decode(v, ids) == kEndOfText);
  }

  TEST_CASE("decode_text repairs split code points") {
    const Vocab v(std::vector<std::string>{});
    const std::string s = "ñ";
    const std::vector<TokenId> half{static_cast<unsigned char>(s[0])};
    const auto d = decode_text(v, half);
    CHECK(d.replaced == 1);
    CHECK(d.text == "\xEF\xBF\xBD");
    CHECK(decode_text(v, encode(v, "camiño")).replaced == 0);
  }

  TEST_CASE("fertility: whole-word vocabulary gives 1") {
    const std::vector<std::pair<std::string, std::string>> merges{{"o", "l"}, {"ol", "a"}, {"c", "a"}, {"ca", "n"}};
    const auto v = Vocab::from_merges(merges, {});
    std::vector<corpus::Document> docs{{"d", corpus::Subcorpus::PublicData, "g", "ola can ola"}};
    CHECK(fertility(v, docs) == 1.0);
  }

  TEST_CASE("fertility: bytes-only vocabulary gives mean word length") {
    const Vocab v(std::vector<std::string>{});
    std::vector<corpus::Document> docs{{"d", corpus::Subcorpus::PublicData, "g", "a bb cccc"}};
    CHECK(fertility(v, docs) == doctest::Approx(7.0 / 3.0));
  }

  TEST_CASE("fertility: target-trained vocabulary segments target text more compactly") {
    const auto a = testing::synthetic_corpus('A', 60, 4, 1);
    const auto b = testing::synthetic_corpus('B', 60, 4, 2);
    const auto va = train_bpe(a, {320, {std::string(kEndOfText)}});
    const auto vb = train_bpe(b, {320, {std::string(kEndOfText)}});
    const auto held = testing::synthetic_corpus('B', 10, 4, 3);
    CHECK(fertility(vb, held) < fertility(va, held));
  }

  TEST_CASE("training is deterministic and the file round-trips") {
    const auto docs = testing::synthetic_corpus('A', 30, 3, 4);
    const auto v1 = train_bpe(docs, {300, {std::string(kEndOfText)}});
    const auto v2 = train_bpe(docs, {300, {std::string(kEndOfText)}});
    CHECK(serialize(v1) == serialize(v2));
    testing::TempDir dir;
    save(v1, dir / "tok.json");
    const auto back = load(dir / "tok.json");
    CHECK(back == v1);
    CHECK(serialize(back) == serialize(v1));
  }

  TEST_CASE("display mapping is a bijection on bytes") {
    std::string all;
    for (int b = 0; b < 256; ++b) all += static_cast<char>(b);
    const auto shown = bytes_to_display(all);
    CHECK(is_valid_utf8(shown));
    CHECK(display_to_bytes(shown) == all);
    CHECK(bytes_to_display(" a") == "\xC4\xA0" "a");
  }

  TEST_CASE("malformed tokenizer files are rejected") {
    CHECK_THROWS(vocab_from_json(nlohmann::json::object()));
    auto j = nlohmann::json::parse(serialize(Vocab::from_merges(kClassicMerges, {})));
    j["merges"][0] = "z q";
    CHECK_THROWS(vocab_from_json(j));
  }
}
