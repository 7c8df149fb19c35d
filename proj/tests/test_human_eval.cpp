#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <thread>

#include "ltx/common.hpp"
#include "ltx/human_eval.hpp"
#include "support.hpp"

using namespace ltx;
using namespace ltx::humeval;

namespace {

constexpr SplitStrategy kBeginEnd{SplitPosition::Begin, SplitPoint::EndSentence};
constexpr SplitStrategy kMiddleMid{SplitPosition::Middle, SplitPoint::MidSentence};

Annotation ann(std::string item, std::string ev, std::array<bool, 6> flags) {
  return {std::move(item), std::move(ev), flags, "2024-01-01T00:00:00Z"};
}

EvalItem eval_item(std::string id, Origin o, std::string model = "") {
  EvalItem it;
  it.item_id = std::move(id);
  it.base_id = "b-" + it.item_id;
  it.origin = o;
  it.model_id = std::move(model);
  return it;
}

const CategoryCell& cell(const ErrorReport& r, std::string_view cond, Category c) {
  for (const auto& cr : r.conditions) {
    if (cr.condition == cond) return cr.cells[static_cast<std::size_t>(c)];
  }
  throw std::logic_error("no condition");
}

corpus::Document doc(std::string id, std::string genre, std::string text) {
  return {std::move(id), corpus::Subcorpus::PublicData, std::move(genre), std::move(text)};
}

}  // namespace

TEST_SUITE("human_eval") {
  TEST_CASE("two sentences, Begin x EndSentence") {
    const auto s = split_text("Primeira frase. Segunda frase.", kBeginEnd);
    CHECK(s.context == "Primeira frase.");
    CHECK(s.continuation == " Segunda frase.");
  }

  TEST_CASE("every strategy reconstructs the text") {
    const std::string text = "Un. Dous tres! Catro cinco seis? Sete oito. Nove dez once doce. Trece.";
    REQUIRE(sentence_spans(text).size() == 6);
    for (auto st : kAllStrategies) {
      const auto s = split_text(text, st);
      CHECK(s.context + s.continuation == text);
      CHECK_FALSE(s.context.empty());
      CHECK_FALSE(s.continuation.empty());
    }
    CHECK(split_text(text, kBeginEnd).context == "Un.");
    CHECK(split_text(text, {SplitPosition::Begin, SplitPoint::MidSentence}).context == "Un. Dous");
    CHECK(split_text(text, {SplitPosition::Middle, SplitPoint::EndSentence}).context ==
          "Un. Dous tres! Catro cinco seis?");
    CHECK(split_text(text, kMiddleMid).context == "Un. Dous tres! Catro cinco seis? Sete");
  }

  TEST_CASE("Middle x MidSentence boundary counted by hand") {
    // 5 sentences: the middle one is the 3rd, so the cut falls after 2 of the 5 words of the 4th.
    const std::string text = "One two three. Four five six seven. Eight nine. Ten eleven twelve thirteen fourteen. Fifteen.";
    const auto s = split_text(text, kMiddleMid);
    CHECK(s.context.size() == 58);
    CHECK(s.context == "One two three. Four five six seven. Eight nine. Ten eleven");
    CHECK(s.continuation == " twelve thirteen fourteen. Fifteen.");
  }

  TEST_CASE("sentence boundaries") {
    const std::string text = "Dixo: \"Vai!\" E foi… Logo, despois, volveu. 3.5 km";
    const auto spans = sentence_spans(text);
    REQUIRE(spans.size() == 4);
    CHECK(text.substr(spans[0].first, spans[0].second - spans[0].first) == "Dixo: \"Vai!\"");
    CHECK(text.substr(spans[1].first, spans[1].second - spans[1].first) == "E foi…");
    CHECK(text.substr(spans[2].first, spans[2].second - spans[2].first) == "Logo, despois, volveu.");
    CHECK(text.substr(spans[3].first, spans[3].second - spans[3].first) == "3.5 km");
    CHECK_THROWS_AS(split_text("Soamente unha frase sen final", kBeginEnd), std::invalid_argument);
    CHECK_THROWS_AS(split_text("Unha soa frase.", kBeginEnd), std::invalid_argument);
  }

  TEST_CASE("strategies are counterbalanced") {
    const auto a = assign_strategies(60, 5);
    for (auto st : kAllStrategies) CHECK(std::count(a.begin(), a.end(), st) == 15);
    CHECK(a == assign_strategies(60, 5));
    CHECK_THROWS_AS(assign_strategies(10, 5), std::invalid_argument);
    CHECK(strategy_from_string(to_string(kMiddleMid)) == kMiddleMid);
  }

  TEST_CASE("selection: a pool of one short text fails on the length bound") {
    const std::vector<corpus::Document> pool{doc("d1", "news", std::string(50, 'a') + ". " + std::string(48, 'b') + ".")};
    try {
      select_texts(pool, {}, 0);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("1 below the minimum length") != std::string::npos);
    }
  }

  TEST_CASE("selection: bounds, determinism, genre quotas") {
    std::vector<corpus::Document> pool;
    for (const auto* g : {"news", "fiction", "science"}) {
      for (auto& d : testing::synthetic_corpus('B', 30, 14, std::hash<std::string>{}(g), g)) {
        d.id = std::string(g) + "-" + d.id;
        pool.push_back(std::move(d));
      }
    }
    pool.push_back(doc("long", "news", std::string(2000, 'x') + ". End."));
    SelectionConfig cfg;
    cfg.n_texts = 20;
    const auto sel = select_texts(pool, cfg, 9);
    CHECK(sel.size() == 20);
    std::map<std::string, int> per_genre;
    std::set<std::string> ids;
    for (const auto& t : sel) {
      ++per_genre[t.genre];
      ids.insert(t.id);
      const auto len = utf8_length(t.text);
      CHECK(len >= 250);
      CHECK(len <= 1400);
    }
    CHECK(ids.size() == 20);
    // 20 over 3 sorted genres: fiction 7, news 7, science 6
    CHECK(per_genre["fiction"] == 7);
    CHECK(per_genre["news"] == 7);
    CHECK(per_genre["science"] == 6);
    const auto again = select_texts(pool, cfg, 9);
    CHECK(std::equal(sel.begin(), sel.end(), again.begin(), [](auto& a, auto& b) { return a.id == b.id; }));
    CHECK(mean_length(sel) > 250.0);

    std::vector<corpus::Document> thin(pool.begin(), pool.begin() + 5);
    thin.insert(thin.end(), pool.begin() + 30, pool.begin() + 90);
    cfg.n_texts = 60;
    try {
      select_texts(thin, cfg, 1);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("'news'") != std::string::npos);
    }
  }

  TEST_CASE("continuation of zero characters is empty") {
    const tokenizer::Vocab v({std::string(tokenizer::kEndOfText)});
    const auto c = testing::toy_config(v.size());
    const nn::Model<float> m{c, nn::init_params<float>(c, 3)};
    CHECK(generate_continuation(m, v, "Contexto.", 0, {}).empty());
  }

  TEST_CASE("sampled continuations respect the character budget") {
    const tokenizer::Vocab v({std::string(tokenizer::kEndOfText)});
    auto c = testing::toy_config(v.size());
    c.max_seq_len = 32;
    const nn::Model<float> m{c, nn::init_params<float>(c, 4)};
    nn::DecodeConfig dc;
    dc.mode = nn::DecodeConfig::Mode::TopP;
    dc.temperature = 1.5;
    dc.top_p = 1.0;
    for (std::size_t budget : {1u, 3u, 10u, 25u}) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        dc.seed = seed;
        const auto out = generate_continuation(m, v, "Era unha vez unha historia moi longa que non cabe.", budget, dc);
        CHECK(utf8_length(out) <= budget);
      }
    }
  }

  TEST_CASE("greedy continuation follows the argmax chain") {
    const tokenizer::Vocab v({std::string(tokenizer::kEndOfText)});
    const auto c = testing::toy_config(v.size(), false);
    nn::Model<double> m{c, nn::zero_params<double>(c)};
    m.params.final_bias(0) = 1.0;
    m.params.lm_head(static_cast<Eigen::Index>('a'), 0) = 10.0;
    const auto prompt = tokenizer::encode(v, "Ola.");
    const auto chain = nn::generate(m, prompt, 5, {}, v.end_of_text());
    CHECK(chain.size() == prompt.size() + 5);
    CHECK(tokenizer::decode_text(v, std::span(chain).subspan(prompt.size())).text == "aaaaa");
    CHECK(generate_continuation(m, v, "Ola.", 5, {}) == "aaaaa");
    CHECK(generate_continuation(m, v, "Ola.", 2, {}) == "aa");
  }

  TEST_CASE("smallest Latin square") {
    std::vector<BaseText> bases(2);
    for (int i = 0; i < 2; ++i) {
      bases[i].base_id = "t" + std::to_string(i + 1);
      bases[i].context = "ctx" + std::to_string(i + 1);
      bases[i].authentic = " auth";
      bases[i].synthetic = " synth";
      bases[i].strategy = kBeginEnd;
      bases[i].generation.model_id = "m";
    }
    const auto e = build_latin_square(bases, 0);
    auto describe = [&](ListId l) {
      std::set<std::pair<std::string, std::string>> out;
      for (const auto& id : e.list(l)) {
        const auto* it = e.find(id);
        out.emplace(it->base_id, std::string(to_string(it->origin)));
      }
      return out;
    };
    CHECK(describe(ListId::A) == std::set<std::pair<std::string, std::string>>{{"t1", "authentic"}, {"t2", "synthetic"}});
    CHECK(describe(ListId::B) == std::set<std::pair<std::string, std::string>>{{"t1", "synthetic"}, {"t2", "authentic"}});
    CHECK(e.items[0].item_id == "item-1");
    CHECK(e.find("item-4") != nullptr);
    CHECK(testing::latin_square_violations(e, bases).empty());
    CHECK_THROWS_AS(build_latin_square(std::vector<BaseText>{bases[0], bases[0]}, 0), DataError);
  }

  TEST_CASE("sixty-text build passes every pairwise check") {
    const auto bases = testing::demo_bases(60, 21);
    const auto e = build_latin_square(bases, 21);
    const auto bad = testing::latin_square_violations(e, bases);
    for (const auto& b : bad) MESSAGE(b);
    CHECK(bad.empty());
    CHECK(e.items.size() == 120);
    CHECK(e.items.front().item_id == "item-001");
    // no list contains both versions of any base
    for (auto l : {ListId::A, ListId::B}) {
      const auto& ids = e.list(l);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) CHECK(e.find(ids[i])->base_id != e.find(ids[j])->base_id);
      }
    }
    CHECK(to_json(build_latin_square(bases, 21)) == to_json(e));
  }

  TEST_CASE("evaluator assignment") {
    const std::vector<std::string> six{"e1", "e2", "e3", "e4", "e5", "e6"};
    const auto m = assign_evaluators(six, 3);
    REQUIRE(m.size() == 6);
    CHECK(std::count_if(m.begin(), m.end(), [](auto& p) { return p.second == ListId::A; }) == 3);
    CHECK(m == assign_evaluators(six, 3));
    const auto two = assign_evaluators(std::vector<std::string>{"x", "y"}, 0);
    CHECK(two.at("x") != two.at("y"));
    CHECK_THROWS_AS(assign_evaluators(std::vector<std::string>{"a", "b", "c"}, 0), std::invalid_argument);
    CHECK_THROWS_AS(assign_evaluators(std::vector<std::string>{"a", "a"}, 0), std::invalid_argument);
  }

  TEST_CASE("blinded payloads and bundle round trip") {
    const auto bases = testing::demo_bases(8, 2);
    auto e = build_latin_square(bases, 2);
    e.evaluators = assign_evaluators(std::vector<std::string>{"e1", "e2"}, 2);
    for (auto l : {ListId::A, ListId::B}) {
      const auto payload = blinded_list(e, l);
      REQUIRE(payload.size() == 8);
      for (const auto& entry : payload) {
        std::set<std::string> keys;
        for (const auto& [k, _] : entry.items()) keys.insert(k);
        CHECK(keys == std::set<std::string>{"item_id", "context", "continuation", "position", "total"});
      }
      CHECK(payload.dump().find("toy") == std::string::npos);
    }
    const auto j = to_json(e);
    const auto back = experiment_from_json(nlohmann::json::parse(j.dump()));
    // key order inside "meta" is not preserved through the unordered reader
    CHECK(nlohmann::json::parse(to_json(back).dump()) == nlohmann::json::parse(j.dump()));
    auto broken = nlohmann::json::parse(j.dump());
    broken["lists"]["A"].push_back("item-999");
    CHECK_THROWS_AS(experiment_from_json(broken), DataError);
  }

  TEST_CASE("annotation JSON and CSV round trip") {
    const auto a = ann("item-1", "e,1", {true, false, true, false, false, true});
    const auto back = annotation_from_json(nlohmann::json::parse(to_json(a).dump()));
    CHECK(back.flags == a.flags);
    CHECK(back.evaluator_id == "e,1");
    const auto flat = annotation_from_json(nlohmann::json::parse(
        R"({"item_id":"i","evaluator_id":"e","form":1,"content":0,"register":false,"repetitive":true,"inappropriate":0,"factual":0})"));
    CHECK(flat.flags == std::array<bool, 6>{true, false, false, true, false, false});
    CHECK_THROWS_AS(annotation_from_json(nlohmann::json::parse(R"({"item_id":"i","evaluator_id":"e"})")), DataError);
    CHECK_THROWS_AS(annotation_from_json(nlohmann::json::parse(
                        R"({"item_id":"i","evaluator_id":"e","form":2,"content":0,"register":0,"repetitive":0,"inappropriate":0,"factual":0})")),
                    DataError);

    const std::vector<Annotation> list{a, ann("item-2", "e\"2", {})};
    const auto csv = annotations_csv(list);
    CHECK(csv.rfind(std::string(kAnnotationCsvHeader) + "\n", 0) == 0);
    const auto parsed = annotations_from_csv(csv);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].evaluator_id == "e,1");
    CHECK(parsed[1].evaluator_id == "e\"2");
    CHECK(parsed[0].flags == a.flags);
    CHECK(parsed[1].timestamp == a.timestamp);
    CHECK_THROWS_AS(annotations_from_csv("a,b\n1,2\n"), DataError);
  }

  TEST_CASE("store: first writer wins and the log replays") {
    testing::TempDir dir;
    const auto log = dir / "ann.jsonl";
    {
      AnnotationStore store(log);
      CHECK(store.submit(ann("i1", "e1", {true})) == AnnotationStore::Status::Accepted);
      CHECK(store.submit(ann("i1", "e1", {false})) == AnnotationStore::Status::Duplicate);
      CHECK(store.submit(ann("i2", "e1", {})) == AnnotationStore::Status::Accepted);
      CHECK(store.count_for("e1") == 2);
    }
    AnnotationStore replay(log);
    const auto snap = replay.snapshot();
    REQUIRE(snap.size() == 2);
    CHECK(snap[0].flags[0]);
    CHECK(replay.submit(ann("i1", "e1", {})) == AnnotationStore::Status::Duplicate);
  }

  TEST_CASE("store: concurrent submissions") {
    testing::TempDir dir;
    AnnotationStore store(dir / "ann.jsonl");
    std::vector<std::thread> threads;
    std::atomic<int> accepted{0};
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&, t] {
        for (int i = 0; i < 50; ++i) {
          // every pair is submitted by two threads
          if (store.submit(ann("i" + std::to_string(i), "e" + std::to_string(t / 2), {})) ==
              AnnotationStore::Status::Accepted) {
            ++accepted;
          }
        }
      });
    }
    for (auto& th : threads) th.join();
    CHECK(accepted == 200);
    CHECK(store.snapshot().size() == 200);
    CHECK(AnnotationStore(dir / "ann.jsonl").snapshot().size() == 200);
  }

  TEST_CASE("empty annotations give an all-zero report") {
    const std::vector<EvalItem> items{eval_item("a", Origin::Authentic), eval_item("s", Origin::Synthetic, "m")};
    const auto r = aggregate(std::vector<Annotation>{}, items);
    REQUIRE(r.conditions.size() == 2);
    for (const auto& c : r.conditions) {
      CHECK(c.judgments == 0);
      for (const auto& cellv : c.cells) {
        CHECK(cellv.percent == 0.0);
        CHECK(cellv.item_percent == 0.0);
      }
    }
  }

  TEST_CASE("two items by three evaluators, counted by hand") {
    const std::vector<EvalItem> items{eval_item("auth", Origin::Authentic), eval_item("gen", Origin::Synthetic, "m")};
    //                         form   content register repet inapp factual
    const std::vector<Annotation> anns{
        ann("auth", "e1", {true, false, false, false, false, false}),
        ann("auth", "e2", {true, true, false, false, false, false}),
        ann("auth", "e3", {false, false, false, false, false, false}),
        ann("gen", "e4", {true, false, false, true, false, false}),
        ann("gen", "e5", {true, false, false, false, false, false}),
        ann("gen", "e6", {false, false, false, false, false, false}),
    };
    const auto r = aggregate(anns, items);
    REQUIRE(r.conditions.size() == 2);
    CHECK(r.conditions[0].condition == "authentic");
    CHECK(r.conditions[1].condition == "m");
    CHECK(r.conditions[0].judgments == 3);
    CHECK(r.conditions[1].judgments == 3);
    // 2 of 3 form judgments per condition
    CHECK(cell(r, "authentic", Category::Form).percent == 200.0 / 3.0);
    CHECK(cell(r, "authentic", Category::Content).percent == 100.0 / 3.0);
    CHECK(cell(r, "m", Category::Repetitive).percent == 100.0 / 3.0);
    CHECK(cell(r, "m", Category::Factual).percent == 0.0);
    CHECK(cell(r, "authentic", Category::Form).item_percent == 100.0);
    CHECK(cell(r, "m", Category::Factual).item_percent == 0.0);
    CHECK(cell(r, "m", Category::Form).items == 1);

    // pooled over both conditions: 4 of 6 form judgments flagged
    std::size_t flagged = 0, judged = 0;
    for (const auto& c : r.conditions) {
      flagged += c.cells[0].flagged;
      judged += c.cells[0].judgments;
    }
    CHECK(flagged == 4);
    CHECK(judged == 6);
    const auto csv = report_csv(r);
    CHECK(csv.find("authentic,form,66.7,2,3,100.0\n") != std::string::npos);
    CHECK(csv.find("m,repetitive,33.3,1,3,100.0\n") != std::string::npos);
    const auto j = to_json(r);
    CHECK(j["metric"] == "judgment_level");
    CHECK(j["conditions"][0]["categories"]["form"]["flagged"] == 2);

    auto dup = anns;
    dup.push_back(ann("gen", "e6", {}));
    CHECK_THROWS_AS(aggregate(dup, items), DataError);
    auto unknown = anns;
    unknown.push_back(ann("ghost", "e1", {}));
    CHECK_THROWS_AS(aggregate(unknown, items), DataError);
  }

  TEST_CASE("denominators: judgments = items x evaluators per list") {
    const auto bases = testing::demo_bases(8, 7);
    auto e = build_latin_square(bases, 7);
    e.evaluators = assign_evaluators(std::vector<std::string>{"e1", "e2", "e3", "e4", "e5", "e6"}, 7);
    std::vector<Annotation> anns;
    std::uint64_t state = 1;
    for (const auto& [ev, l] : e.evaluators) {
      for (const auto& id : e.list(l)) {
        Annotation a{id, ev, {}, ""};
        for (auto& f : a.flags) f = testing::splitmix(state) % 3 == 0;
        anns.push_back(a);
      }
    }
    const auto r = aggregate(anns, e.items);
    for (const auto& c : r.conditions) {
      CHECK(c.judgments == c.items * 3);
      for (const auto& cl : c.cells) {
        CHECK(cl.judgments == c.judgments);
        CHECK(cl.percent >= 0.0);
        CHECK(cl.percent <= 100.0);
      }
    }
  }

  TEST_CASE("report layout renders headline percentages") {
    ErrorReport r;
    auto cond = [](std::string name, double form, double content) {
      ConditionReport c;
      c.condition = std::move(name);
      c.items = 100;
      c.judgments = 100;
      c.cells[0] = {100, static_cast<std::size_t>(form), form, 100, static_cast<std::size_t>(form), form};
      c.cells[1] = {100, static_cast<std::size_t>(content), content, 100, static_cast<std::size_t>(content), content};
      return c;
    };
    r.conditions = {cond("authentic", 27, 9), cond("model-bloom", 41, 28), cond("model-cerebras", 22, 28)};
    const auto csv = report_csv(r);
    CHECK(csv.find("authentic,form,27.0,27,100,27.0\n") != std::string::npos);
    CHECK(csv.find("authentic,content,9.0,9,100,9.0\n") != std::string::npos);
    CHECK(csv.find("model-bloom,form,41.0,41,100,41.0\n") != std::string::npos);
    CHECK(csv.find("model-cerebras,form,22.0,22,100,22.0\n") != std::string::npos);
    CHECK(csv.find("model-bloom,content,28.0,28,100,28.0\n") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 6);
  }
}
