#include "ltx/cli.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ltx/annotation_server.hpp"
#include "ltx/checkpoint.hpp"
#include "ltx/corpus.hpp"
#include "ltx/eval_tasks.hpp"
#include "ltx/human_eval.hpp"
#include "ltx/tokenizer.hpp"
#include "ltx/trainer.hpp"
#include "ltx/transplant.hpp"

namespace ltx::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Reads a JSON object as CLI11 config items; nested objects address subcommands.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::json j = nlohmann::json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
      const auto& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        const auto& r = opt->results();
        j[name] = r.size() == 1 ? nlohmann::json(r.front()) : nlohmann::json(r);
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

  static void collect(const nlohmann::json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        collect(value, p, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else if (!value.is_null()) {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

struct Global {
  std::uint64_t seed = 0;
  std::string out = ".";
};

void summary(std::ostream& out, std::string_view stage, ordered_json body) {
  ordered_json j{{"stage", stage}};
  for (auto& [k, v] : body.items()) j[k] = v;
  out << j.dump() << std::endl;
}

std::vector<corpus::Document> read_documents(const fs::path& path, std::ostream& err) {
  auto res = corpus::ingest(path, fs::is_directory(path) ? corpus::InputFormat::PlainDir : corpus::InputFormat::Jsonl);
  for (const auto& w : res.warnings) err << "warning: " << w << '\n';
  return std::move(res.documents);
}

std::string documents_jsonl(std::span<const corpus::Document> docs) {
  std::string out;
  for (const auto& d : docs) out += corpus::to_json(d).dump() + '\n';
  return out;
}

template <typename T>
std::string jsonl(const std::vector<T>& lines) {
  std::string out;
  for (const auto& l : lines) out += l.dump() + '\n';
  return out;
}

tokenizer::Vocab load_vocab(const fs::path& p) { return tokenizer::load(p); }

void check_vocab(const Checkpoint& ckpt, const tokenizer::Vocab& vocab, const fs::path& where) {
  if (ckpt.config().vocab_size != vocab.size()) {
    throw DataError("checkpoint " + where.string() + " has vocabulary size " +
                    std::to_string(ckpt.config().vocab_size) + " but the tokenizer has " +
                    std::to_string(vocab.size()));
  }
}

std::vector<humeval::Annotation> read_annotations(const fs::path& path) {
  const auto text = read_file(path);
  if (path.extension() == ".csv") return humeval::annotations_from_csv(text);
  std::vector<humeval::Annotation> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": invalid JSON");
    out.push_back(humeval::annotation_from_json(j));
  }
  return out;
}

// ---------------------------------------------------------------- stages

struct CleanOpts {
  std::string input, reference, subcorpus = "public", genre = "unknown";
  int order = 3;
  double alpha = 1.0, percentile = 95.0;
  std::optional<double> threshold, heldout_fraction;
  std::size_t min_chars = 0;
};

void run_clean(const Global& g, const CleanOpts& o, std::ostream& out, std::ostream& err) {
  const fs::path input(o.input);
  auto ingested = corpus::ingest(input, fs::is_directory(input) ? corpus::InputFormat::PlainDir
                                                                : corpus::InputFormat::Jsonl,
                                 corpus::subcorpus_from_string(o.subcorpus), o.genre);
  for (const auto& w : ingested.warnings) err << "warning: " << w << '\n';
  const auto& docs = ingested.documents;
  const auto reference = o.reference.empty() ? docs : read_documents(o.reference, err);

  corpus::NgramModel lm(o.order, o.alpha);
  lm.train(reference);
  corpus::CleanerConfig cfg;
  cfg.min_chars = o.min_chars;
  cfg.ppl_threshold = o.threshold ? *o.threshold : corpus::calibrate_threshold(reference, lm, o.percentile);
  const auto decisions = corpus::clean_all(docs, lm, cfg);

  std::vector<corpus::Document> kept;
  std::vector<ordered_json> report;
  std::map<std::string, std::size_t> dropped;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    report.push_back(corpus::clean_report_line(docs[i], decisions[i]));
    if (decisions[i].keep) {
      kept.push_back(docs[i]);
    } else {
      ++dropped[std::string(corpus::to_string(decisions[i].reason))];
    }
  }
  const fs::path dir(g.out);
  write_file_atomic(dir / "clean.jsonl", documents_jsonl(kept));
  write_file_atomic(dir / "clean_report.jsonl", jsonl(report));
  ordered_json body{{"documents", docs.size()},
                    {"kept", kept.size()},
                    {"dropped", dropped},
                    {"malformed", ingested.malformed},
                    {"ppl_threshold", cfg.ppl_threshold},
                    {"output", (dir / "clean.jsonl").string()}};
  if (o.heldout_fraction) {
    const auto parts = corpus::split(kept, *o.heldout_fraction, g.seed);
    write_file_atomic(dir / "train.jsonl", documents_jsonl(parts.train));
    write_file_atomic(dir / "heldout.jsonl", documents_jsonl(parts.heldout));
    body["train"] = parts.train.size();
    body["heldout"] = parts.heldout.size();
  }
  summary(out, "clean", std::move(body));
}

void run_stats(const Global& g, const std::string& input, bool write, std::ostream& out, std::ostream& err) {
  std::size_t malformed = 0;
  const auto s = corpus::stats_from_jsonl(input, &malformed);
  if (malformed > 0) err << "warning: " << malformed << " malformed lines skipped\n";
  out << s.render_table();
  auto body = s.to_json();
  body["malformed"] = malformed;
  if (write) write_file_atomic(fs::path(g.out) / "stats.json", body.dump(2) + '\n');
  summary(out, "stats", std::move(body));
}

struct TokenizerOpts {
  std::string input;
  std::size_t vocab_size = tokenizer::kDefaultVocabSize;
  std::vector<std::string> special{std::string(tokenizer::kEndOfText)};
};

void run_train_tokenizer(const Global& g, const TokenizerOpts& o, std::ostream& out, std::ostream& err) {
  const auto docs = read_documents(o.input, err);
  tokenizer::TokenizerTrainConfig cfg;
  cfg.vocab_size = o.vocab_size;
  cfg.special_tokens = o.special;
  const auto vocab = tokenizer::train_bpe(docs, cfg);
  const auto path = fs::path(g.out) / "tokenizer.json";
  tokenizer::save(vocab, path);
  summary(out, "train-tokenizer", {{"vocab_size", vocab.size()},
                                   {"merges", vocab.merges().size()},
                                   {"fertility", tokenizer::fertility(vocab, docs)},
                                   {"output", path.string()}});
}

struct TransplantOpts {
  std::string src_tok, tgt_tok, ckpt, tie = "follow";
};

void run_transplant(const Global& g, const TransplantOpts& o, std::ostream& out) {
  const auto src_tok = load_vocab(o.src_tok);
  const auto tgt_tok = load_vocab(o.tgt_tok);
  const auto src = load_checkpoint(o.ckpt);
  const auto policy = o.tie == "tied" ? transplant::TiePolicy::ForceTied : transplant::TiePolicy::FollowCheckpoint;
  const auto result = transplant::transplant_model(src, src_tok, tgt_tok, policy);
  const fs::path dir(g.out);
  save_checkpoint(result.checkpoint, dir / "transplanted.ltb");
  const auto report = transplant::to_json(result.report);
  write_file_atomic(dir / "transplant_report.json", report.dump(2) + '\n');
  auto body = report;
  body["output"] = (dir / "transplanted.ltb").string();
  summary(out, "transplant", std::move(body));
}

struct PretrainOpts {
  std::string ckpt, model_config, tokenizer, train, heldout;
  train::OptimizerConfig opt;
  train::TrainConfig tc;
  bool no_decay_embeddings = false;
  std::optional<double> grad_clip;
  std::optional<std::uint64_t> stop_after;
};

void run_pretrain(const Global& g, PretrainOpts o, std::ostream& out, std::ostream& err) {
  const auto vocab = load_vocab(o.tokenizer);
  Checkpoint ckpt = [&] {
    if (!o.ckpt.empty()) return load_checkpoint(o.ckpt);
    auto j = nlohmann::json::parse(read_file(o.model_config), nullptr, false);
    if (j.is_discarded()) throw DataError("model config is not valid JSON: " + o.model_config);
    return new_checkpoint(nn::model_config_from_json(j), g.seed);
  }();
  check_vocab(ckpt, vocab, o.ckpt.empty() ? fs::path(o.model_config) : fs::path(o.ckpt));
  o.opt.decay_embeddings = !o.no_decay_embeddings;
  o.tc.seed = g.seed;
  o.tc.grad_clip = o.grad_clip;
  o.opt.validate();
  o.tc.validate(ckpt.config());

  const auto stream = train::pack_documents(vocab, read_documents(o.train, err));
  std::optional<std::vector<TokenId>> heldout;
  if (!o.heldout.empty()) heldout = train::pack_documents(vocab, read_documents(o.heldout, err));
  const auto window = std::min(o.tc.seq_len, ckpt.config().max_seq_len);
  std::optional<double> ppl_before;
  if (heldout) ppl_before = nn::perplexity(ckpt.model, *heldout, window);

  const fs::path dir(g.out);
  const auto start_step = ckpt.step();
  train::TrainHooks hooks;
  hooks.stop_after = o.stop_after;
  hooks.on_checkpoint = [&](const Checkpoint& c) {
    save_checkpoint(c, dir / ("checkpoint-" + std::to_string(c.step()) + ".ltb"));
  };
  const auto result = train::train(ckpt, stream, o.tc, o.opt, hooks);
  write_file_atomic(dir / "loss_curve.csv", train::loss_curve_csv(result.curve));
  write_file_atomic(dir / "train_config.json",
                    ordered_json{{"train", train::to_json(o.tc)}, {"optimizer", train::to_json(o.opt)}}.dump(2) + '\n');
  if (result.aborted) throw DataError("training aborted: " + result.abort_reason);
  save_checkpoint(ckpt, dir / "model.ltb");

  ordered_json body{{"start_step", start_step}, {"end_step", ckpt.step()}, {"steps_run", result.curve.size()}};
  if (!result.curve.empty()) {
    body["first_loss"] = result.curve.front().loss;
    body["final_loss"] = result.curve.back().loss;
  }
  if (heldout) {
    body["heldout_perplexity_before"] = *ppl_before;
    body["heldout_perplexity_after"] = nn::perplexity(ckpt.model, *heldout, window);
  }
  body["output"] = (dir / "model.ltb").string();
  summary(out, "pretrain", std::move(body));
}

struct EvalOpts {
  std::string ckpt, tokenizer, task;
  std::size_t k = 5;
};

void run_eval(const Global& g, const EvalOpts& o, std::ostream& out) {
  const auto vocab = load_vocab(o.tokenizer);
  const auto ckpt = load_checkpoint(o.ckpt);
  check_vocab(ckpt, vocab, o.ckpt);
  const auto task = eval::load_task(o.task);
  const auto result = eval::evaluate(ckpt.model, vocab, task, {o.k, g.seed});
  const fs::path dir(g.out);
  auto body = eval::to_json(result);
  body["task"] = task.name;
  write_file_atomic(dir / ("eval-" + task.name + ".json"), body.dump(2) + '\n');
  write_file_atomic(dir / ("eval-" + task.name + ".csv"), eval::per_item_csv(result));
  summary(out, "eval", std::move(body));
}

struct BuildOpts {
  std::string heldout, tokenizer;
  std::vector<std::string> models;
  std::vector<std::string> evaluators{"e1", "e2", "e3", "e4", "e5", "e6"};
  humeval::SelectionConfig selection;
  double temperature = 0.8, top_p = 0.9;
  bool greedy = false;
};

void run_humeval_build(const Global& g, const BuildOpts& o, std::ostream& out, std::ostream& err) {
  const auto vocab = load_vocab(o.tokenizer);
  std::vector<std::pair<std::string, Checkpoint>> models;
  for (const auto& spec : o.models) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--model expects id=path, got '" + spec + "'");
    const fs::path path = spec.substr(eq + 1);
    auto ckpt = load_checkpoint(path);
    check_vocab(ckpt, vocab, path);
    models.emplace_back(spec.substr(0, eq), std::move(ckpt));
  }
  const auto heldout = read_documents(o.heldout, err);
  const auto texts = humeval::select_texts(heldout, o.selection, g.seed);
  const auto strategies = humeval::assign_strategies(texts.size(), g.seed);

  std::vector<humeval::BaseText> bases;
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto& [model_id, ckpt] = models[i % models.size()];
    const auto parts = humeval::split_text(texts[i].text, strategies[i]);
    nn::DecodeConfig dc;
    dc.mode = o.greedy ? nn::DecodeConfig::Mode::Greedy : nn::DecodeConfig::Mode::TopP;
    dc.temperature = o.temperature;
    dc.top_p = o.top_p;
    dc.seed = g.seed + i;
    try {
      auto synthetic = humeval::generate_continuation(ckpt.model, vocab, parts.context,
                                                      utf8_length(parts.continuation), dc);
      bases.push_back({texts[i].id, texts[i].genre, strategies[i], parts.context, parts.continuation,
                       std::move(synthetic), {model_id, dc}});
    } catch (const std::exception& e) {
      ++dropped;
      err << "warning: generation failed for '" << texts[i].id << "', text dropped: " << e.what() << '\n';
    }
  }
  auto experiment = humeval::build_latin_square(bases, g.seed);
  experiment.evaluators = humeval::assign_evaluators(o.evaluators, g.seed);
  experiment.metadata["selection"] = {{"n_texts", o.selection.n_texts},
                                      {"min_chars", o.selection.min_chars},
                                      {"max_chars", o.selection.max_chars},
                                      {"mean_length", humeval::mean_length(texts)}};
  experiment.metadata["dropped"] = dropped;
  const auto path = fs::path(g.out) / "experiment.json";
  write_file_atomic(path, humeval::to_json(experiment).dump(2) + '\n');
  summary(out, "humeval-build", {{"texts", texts.size()},
                                 {"mean_length", humeval::mean_length(texts)},
                                 {"items", experiment.items.size()},
                                 {"dropped", dropped},
                                 {"output", path.string()}});
}

humeval::Experiment load_experiment(const fs::path& path) {
  auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw DataError("experiment bundle is not valid JSON: " + path.string());
  return humeval::experiment_from_json(j);
}

struct ServeOpts {
  std::string experiment, annotations, host = "127.0.0.1";
  int port = 8080;
};

void run_humeval_serve(const Global& g, const ServeOpts& o, std::ostream& out) {
  auto experiment = load_experiment(o.experiment);
  const fs::path log = o.annotations.empty() ? fs::path(g.out) / "annotations.jsonl" : fs::path(o.annotations);
  if (log.has_parent_path()) fs::create_directories(log.parent_path());
  humeval::AnnotationStore store(log);
  humeval::AnnotationServer server(std::move(experiment), store);
  const int port = o.port == 0 ? server.bind_to_any_port(o.host) : (server.bind(o.host, o.port) ? o.port : -1);
  if (port < 0) throw std::runtime_error("cannot bind " + o.host + ":" + std::to_string(o.port));
  summary(out, "humeval-serve", {{"host", o.host}, {"port", port}, {"annotations", log.string()}});
  server.listen_after_bind();
}

void run_humeval_report(const Global& g, const std::string& experiment_path, const std::string& annotations,
                        std::ostream& out) {
  const auto experiment = load_experiment(experiment_path);
  const auto ann = read_annotations(annotations);
  const auto report = humeval::aggregate(ann, experiment.items);
  const fs::path dir(g.out);
  const auto j = humeval::to_json(report);
  write_file_atomic(dir / "report.json", j.dump(2) + '\n');
  write_file_atomic(dir / "report.csv", humeval::report_csv(report));
  write_file_atomic(dir / "annotations.csv", humeval::annotations_csv(ann));
  auto body = j;
  body["annotations"] = ann.size();
  summary(out, "humeval-report", std::move(body));
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continual pretraining pipeline: corpus cleaning, tokenizer training, embedding transplant, "
               "training, evaluation and blinded human evaluation.",
               "ltx"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file (flags override it)");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  CleanOpts clean;
  auto* c = app.add_subcommand("clean", "Filter documents by n-gram perplexity and length");
  c->add_option("input", clean.input, "JSONL corpus or directory of .txt files")->required()->check(CLI::ExistingPath);
  c->add_option("--reference", clean.reference, "Clean JSONL sample for the n-gram model")->check(CLI::ExistingFile);
  c->add_option("--subcorpus", clean.subcorpus, "Subcorpus for directory input")
      ->check(CLI::IsMember({"transfer", "public"}));
  c->add_option("--genre", clean.genre, "Genre for directory input");
  c->add_option("--order", clean.order, "n-gram order")->check(CLI::PositiveNumber);
  c->add_option("--alpha", clean.alpha, "Additive smoothing")->check(CLI::PositiveNumber);
  c->add_option("--threshold", clean.threshold, "Perplexity threshold (default: calibrated)");
  c->add_option("--percentile", clean.percentile, "Calibration percentile")->check(CLI::Range(0.0, 100.0));
  c->add_option("--min-chars", clean.min_chars, "Minimum length in characters");
  c->add_option("--heldout-fraction", clean.heldout_fraction, "Also write a train/held-out split");

  std::string stats_input;
  bool stats_write = false;
  auto* s = app.add_subcommand("stats", "Token and document counts per subcorpus and genre");
  s->add_option("input", stats_input, "JSONL corpus or pre-counted rows")->required()->check(CLI::ExistingFile);
  s->add_flag("--write", stats_write, "Also write stats.json to --out");

  TokenizerOpts tok;
  auto* t = app.add_subcommand("train-tokenizer", "Train a byte-level BPE tokenizer");
  t->add_option("input", tok.input, "JSONL corpus")->required()->check(CLI::ExistingPath);
  t->add_option("--vocab-size", tok.vocab_size, "Vocabulary size including special tokens")->capture_default_str();
  t->add_option("--special", tok.special, "Special tokens");

  TransplantOpts tr;
  auto* x = app.add_subcommand("transplant", "Move a checkpoint to a new tokenizer");
  x->add_option("--src-tok", tr.src_tok, "Source tokenizer")->required()->check(CLI::ExistingFile);
  x->add_option("--tgt-tok", tr.tgt_tok, "Target tokenizer")->required()->check(CLI::ExistingFile);
  x->add_option("--ckpt", tr.ckpt, "Source checkpoint")->required()->check(CLI::ExistingFile);
  x->add_option("--tie", tr.tie, "Output head policy")->check(CLI::IsMember({"follow", "tied"}));

  PretrainOpts pt;
  auto* p = app.add_subcommand("pretrain", "Causal language-model training");
  auto* p_ckpt = p->add_option("--ckpt", pt.ckpt, "Checkpoint to continue from")->check(CLI::ExistingFile);
  auto* p_cfg = p->add_option("--model-config", pt.model_config, "Model config JSON for a fresh model")
                    ->check(CLI::ExistingFile);
  p_ckpt->excludes(p_cfg);
  p->add_option("--tokenizer", pt.tokenizer, "Tokenizer")->required()->check(CLI::ExistingFile);
  p->add_option("--train", pt.train, "Training JSONL")->required()->check(CLI::ExistingPath);
  p->add_option("--heldout", pt.heldout, "Held-out JSONL for perplexity")->check(CLI::ExistingPath);
  p->add_option("--steps", pt.opt.total_steps, "Total schedule steps")->capture_default_str();
  p->add_option("--lr", pt.opt.lr0, "Peak learning rate")->capture_default_str();
  p->add_option("--warmup", pt.opt.warmup_steps, "Warmup steps");
  p->add_option("--weight-decay", pt.opt.weight_decay, "Decoupled weight decay")->capture_default_str();
  p->add_option("--beta1", pt.opt.beta1);
  p->add_option("--beta2", pt.opt.beta2);
  p->add_option("--eps", pt.opt.epsilon);
  p->add_flag("--no-decay-embeddings", pt.no_decay_embeddings, "Exclude embeddings and head from weight decay");
  p->add_option("--seq-len", pt.tc.seq_len, "Block length")->capture_default_str();
  p->add_option("--batch-size", pt.tc.batch_size, "Blocks per step")->capture_default_str();
  p->add_option("--checkpoint-every", pt.tc.checkpoint_every, "Periodic checkpoint interval");
  p->add_option("--grad-clip", pt.grad_clip, "Global gradient norm clip");
  p->add_option("--stop-after", pt.stop_after, "Stop after this step (resume later)");

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "k-shot multiple-choice evaluation");
  e->add_option("--ckpt", ev.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  e->add_option("--tokenizer", ev.tokenizer, "Tokenizer")->required()->check(CLI::ExistingFile);
  e->add_option("--task", ev.task, "Task header JSON")->required()->check(CLI::ExistingFile);
  e->add_option("-k,--k-shots", ev.k, "Number of exemplars")->capture_default_str();

  BuildOpts hb;
  auto* b = app.add_subcommand("humeval-build", "Build the blinded two-list experiment");
  b->add_option("--heldout", hb.heldout, "Held-out JSONL")->required()->check(CLI::ExistingPath);
  b->add_option("--tokenizer", hb.tokenizer, "Tokenizer")->required()->check(CLI::ExistingFile);
  b->add_option("--model", hb.models, "Generator as id=checkpoint (repeatable)")->required();
  b->add_option("--evaluators", hb.evaluators, "Evaluator ids (even count)");
  b->add_option("--n-texts", hb.selection.n_texts, "Texts to select")->capture_default_str();
  b->add_option("--min-chars", hb.selection.min_chars)->capture_default_str();
  b->add_option("--max-chars", hb.selection.max_chars)->capture_default_str();
  b->add_option("--temperature", hb.temperature)->capture_default_str();
  b->add_option("--top-p", hb.top_p)->capture_default_str();
  b->add_flag("--greedy", hb.greedy, "Greedy decoding instead of nucleus sampling");

  ServeOpts sv;
  auto* v = app.add_subcommand("humeval-serve", "Serve the annotation API");
  v->add_option("--experiment", sv.experiment, "Experiment bundle")->required()->check(CLI::ExistingFile);
  v->add_option("--annotations", sv.annotations, "Append-only annotation log (default <out>/annotations.jsonl)");
  v->add_option("--host", sv.host)->capture_default_str();
  v->add_option("--port", sv.port, "Port (0 picks a free one)")->capture_default_str();

  std::string rep_experiment, rep_annotations;
  auto* r = app.add_subcommand("humeval-report", "Aggregate annotations into error rates");
  r->add_option("--experiment", rep_experiment, "Experiment bundle")->required()->check(CLI::ExistingFile);
  r->add_option("--annotations", rep_annotations, "Annotation log (.jsonl) or export (.csv)")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    if (code == 0) return 0;
    err << app.help();
    return 1;
  }

  try {
    if (app.got_subcommand(c)) run_clean(g, clean, out, err);
    if (app.got_subcommand(s)) run_stats(g, stats_input, stats_write, out, err);
    if (app.got_subcommand(t)) run_train_tokenizer(g, tok, out, err);
    if (app.got_subcommand(x)) run_transplant(g, tr, out);
    if (app.got_subcommand(p)) {
      if (pt.ckpt.empty() && pt.model_config.empty()) {
        err << "pretrain needs --ckpt or --model-config\n" << p->help();
        return 1;
      }
      run_pretrain(g, pt, out, err);
    }
    if (app.got_subcommand(e)) run_eval(g, ev, out);
    if (app.got_subcommand(b)) run_humeval_build(g, hb, out, err);
    if (app.got_subcommand(v)) run_humeval_serve(g, sv, out);
    if (app.got_subcommand(r)) run_humeval_report(g, rep_experiment, rep_annotations, out);
  } catch (const DataError& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  }
  return 0;
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace ltx::cli
