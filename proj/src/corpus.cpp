#include "ltx/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace ltx::corpus {

using nlohmann::ordered_json;

std::string_view to_string(Subcorpus s) {
  return s == Subcorpus::TransferAgreement ? "transfer" : "public";
}

Subcorpus subcorpus_from_string(std::string_view s) {
  if (s == "transfer") return Subcorpus::TransferAgreement;
  if (s == "public") return Subcorpus::PublicData;
  throw DataError("unknown subcorpus: " + std::string(s));
}

ordered_json to_json(const Document& doc) {
  return {{"id", doc.id}, {"subcorpus", to_string(doc.subcorpus)}, {"genre", doc.genre}, {"text", doc.text}};
}

std::optional<Document> parse_document(std::string_view line) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  for (const char* key : {"id", "subcorpus", "genre", "text"}) {
    if (!j.contains(key) || !j[key].is_string()) return std::nullopt;
  }
  Document doc;
  doc.id = j["id"].get<std::string>();
  const auto sc = j["subcorpus"].get<std::string>();
  if (sc != "transfer" && sc != "public") return std::nullopt;
  doc.subcorpus = subcorpus_from_string(sc);
  doc.genre = j["genre"].get<std::string>();
  doc.text = j["text"].get<std::string>();
  if (doc.id.empty()) return std::nullopt;
  return doc;
}

IngestResult ingest(const std::filesystem::path& path, InputFormat format, Subcorpus dir_subcorpus,
                    std::string_view dir_genre) {
  IngestResult result;
  std::set<std::string> seen;
  auto accept = [&](Document doc, const std::string& where) {
    if (!seen.insert(doc.id).second) {
      ++result.malformed;
      result.warnings.push_back(where + ": duplicate id '" + doc.id + "'");
      return;
    }
    result.documents.push_back(std::move(doc));
  };

  if (format == InputFormat::Jsonl) {
    std::ifstream in(path);
    if (!in || std::filesystem::is_directory(path)) {
      throw std::runtime_error("cannot read corpus: " + path.string());
    }
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto doc = parse_document(line);
      const auto where = path.filename().string() + ":" + std::to_string(lineno);
      if (!doc) {
        ++result.malformed;
        result.warnings.push_back(where + ": malformed record");
        continue;
      }
      accept(std::move(*doc), where);
    }
  } else {
    if (!std::filesystem::is_directory(path)) {
      throw std::runtime_error("not a readable directory: " + path.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    for (const auto& f : files) {
      Document doc;
      doc.id = f.filename().string();
      doc.subcorpus = dir_subcorpus;
      doc.genre = std::string(dir_genre);
      doc.text = read_file(f);
      const auto where = doc.id;
      if (const auto n = sanitize_utf8(doc.text)) {
        result.warnings.push_back(where + ": " + std::to_string(n) + " invalid UTF-8 bytes replaced with U+FFFD");
      }
      accept(std::move(doc), where);
    }
  }
  std::sort(result.documents.begin(), result.documents.end(),
            [](const Document& a, const Document& b) { return a.id < b.id; });
  return result;
}

std::vector<std::string_view> whitespace_tokens(std::string_view text) {
  std::vector<std::string_view> out;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const auto start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

// ---------------------------------------------------------------- n-gram model

namespace {
constexpr std::string_view kStartToken = "<s>";
constexpr char kKeySep = '\x1f';
}  // namespace

NgramModel::NgramModel(int order, double alpha) : order_(order), alpha_(alpha) {
  if (order < 1) throw std::invalid_argument("n-gram order must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("smoothing constant must be > 0");
}

std::string NgramModel::context_key(std::span<const std::string_view> context) const {
  std::string key;
  for (const auto& t : context) {
    key.append(t);
    key += kKeySep;
  }
  return key;
}

void NgramModel::train(std::string_view text) {
  const auto tokens = whitespace_tokens(text);
  std::vector<std::string_view> padded(static_cast<std::size_t>(order_ - 1), kStartToken);
  padded.insert(padded.end(), tokens.begin(), tokens.end());
  const auto n_ctx = static_cast<std::size_t>(order_ - 1);
  for (std::size_t i = n_ctx; i < padded.size(); ++i) {
    auto& ctx = counts_[context_key(std::span(padded).subspan(i - n_ctx, n_ctx))];
    ++ctx.total;
    ++ctx.next[std::string(padded[i])];
    ++types_[std::string(padded[i])];
  }
}

void NgramModel::train(std::span<const Document> docs) {
  for (const auto& d : docs) train(d.text);
}

double NgramModel::log_prob(std::span<const std::string_view> context, std::string_view token) const {
  const double v = static_cast<double>(std::max<std::size_t>(types_.size(), 1));
  std::uint64_t joint = 0;
  std::uint64_t total = 0;
  if (auto it = counts_.find(context_key(context)); it != counts_.end()) {
    total = it->second.total;
    if (auto jt = it->second.next.find(std::string(token)); jt != it->second.next.end()) joint = jt->second;
  }
  return std::log((static_cast<double>(joint) + alpha_) / (static_cast<double>(total) + alpha_ * v));
}

double perplexity(std::string_view text, const NgramModel& model) {
  const auto tokens = whitespace_tokens(text);
  if (tokens.empty()) throw std::invalid_argument("unscorable text: no tokens");
  const auto n_ctx = static_cast<std::size_t>(model.order() - 1);
  std::vector<std::string_view> padded(n_ctx, kStartToken);
  padded.insert(padded.end(), tokens.begin(), tokens.end());
  double sum = 0.0;
  for (std::size_t i = n_ctx; i < padded.size(); ++i) {
    sum += model.log_prob(std::span(padded).subspan(i - n_ctx, n_ctx), padded[i]);
  }
  return std::exp(-sum / static_cast<double>(tokens.size()));
}

// ---------------------------------------------------------------- cleaning

std::string_view to_string(DropReason r) {
  switch (r) {
    case DropReason::TooShort: return "too_short";
    case DropReason::HighPerplexity: return "high_perplexity";
    case DropReason::Empty: return "no_tokens";
  }
  return "unknown";
}

CleanDecision clean(const Document& doc, const NgramModel& model, const CleanerConfig& cfg) {
  if (!(cfg.ppl_threshold > 1.0)) throw std::invalid_argument("perplexity threshold must be > 1");
  CleanDecision d;
  if (utf8_length(doc.text) < cfg.min_chars) {
    d.keep = false;
    d.reason = DropReason::TooShort;
    return d;
  }
  if (whitespace_tokens(doc.text).empty()) {
    d.keep = false;
    d.reason = DropReason::Empty;
    return d;
  }
  d.perplexity = perplexity(doc.text, model);
  if (*d.perplexity > cfg.ppl_threshold) {
    d.keep = false;
    d.reason = DropReason::HighPerplexity;
  }
  return d;
}

std::vector<CleanDecision> clean_all(std::span<const Document> docs, const NgramModel& model,
                                     const CleanerConfig& cfg) {
  std::vector<CleanDecision> out(docs.size());
  const auto workers = std::min(worker_count(), std::max<std::size_t>(docs.size(), 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < docs.size(); ++i) out[i] = clean(docs[i], model, cfg);
    return out;
  }
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < docs.size(); i += workers) out[i] = clean(docs[i], model, cfg);
      });
    }
  }
  return out;
}

double calibrate_threshold(std::span<const Document> sample, const NgramModel& model, double percentile) {
  if (!(percentile > 0.0 && percentile <= 100.0)) throw std::invalid_argument("percentile must be in (0, 100]");
  std::vector<double> ppl;
  for (const auto& d : sample) {
    if (!whitespace_tokens(d.text).empty()) ppl.push_back(perplexity(d.text, model));
  }
  if (ppl.empty()) throw DataError("calibration sample has no scorable documents");
  std::sort(ppl.begin(), ppl.end());
  const auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(ppl.size())));
  return ppl[std::clamp<std::size_t>(rank, 1, ppl.size()) - 1];
}

ordered_json clean_report_line(const Document& doc, const CleanDecision& d) {
  ordered_json j;
  j["id"] = doc.id;
  j["decision"] = d.keep ? "keep" : "drop";
  j["reason"] = d.keep ? nullptr : ordered_json(to_string(d.reason));
  j["perplexity"] = d.perplexity ? ordered_json(*d.perplexity) : ordered_json(nullptr);
  return j;
}

// ---------------------------------------------------------------- statistics

void CorpusStats::add(Subcorpus sc, std::string_view genre, Counts counts) {
  auto& rows = rows_[sc];
  auto it = std::find_if(rows.begin(), rows.end(), [&](const Row& r) { return r.genre == genre; });
  if (it == rows.end()) {
    rows.push_back({std::string(genre), counts});
  } else {
    it->counts += counts;
  }
}

void CorpusStats::add(const Document& doc) {
  add(doc.subcorpus, doc.genre, {whitespace_tokens(doc.text).size(), 1});
}

Counts CorpusStats::subtotal(Subcorpus sc) const {
  Counts c;
  if (auto it = rows_.find(sc); it != rows_.end()) {
    for (const auto& r : it->second) c += r.counts;
  }
  return c;
}

Counts CorpusStats::total() const {
  Counts c = subtotal(Subcorpus::TransferAgreement);
  c += subtotal(Subcorpus::PublicData);
  return c;
}

const std::vector<CorpusStats::Row>& CorpusStats::rows(Subcorpus sc) const {
  static const std::vector<Row> empty;
  auto it = rows_.find(sc);
  return it == rows_.end() ? empty : it->second;
}

ordered_json CorpusStats::to_json() const {
  ordered_json j;
  ordered_json subs = ordered_json::array();
  for (auto sc : {Subcorpus::TransferAgreement, Subcorpus::PublicData}) {
    ordered_json s;
    s["subcorpus"] = to_string(sc);
    s["genres"] = ordered_json::array();
    for (const auto& r : rows(sc)) {
      s["genres"].push_back({{"genre", r.genre}, {"tokens", r.counts.tokens}, {"documents", r.counts.documents}});
    }
    const auto st = subtotal(sc);
    s["subtotal"] = {{"tokens", st.tokens}, {"documents", st.documents}};
    subs.push_back(std::move(s));
  }
  j["subcorpora"] = std::move(subs);
  const auto t = total();
  j["total"] = {{"tokens", t.tokens}, {"documents", t.documents}};
  return j;
}

std::string CorpusStats::render_table() const {
  std::ostringstream out;
  auto line = [&](std::string_view a, std::string_view b, Counts c) {
    out << std::left << std::setw(12) << a << std::setw(24) << b << std::right << std::setw(16)
        << group_thousands(c.tokens) << std::setw(14) << group_thousands(c.documents) << '\n';
  };
  out << std::left << std::setw(12) << "Subcorpus" << std::setw(24) << "Genre" << std::right << std::setw(16)
      << "Tokens" << std::setw(14) << "Documents" << '\n';
  for (auto sc : {Subcorpus::TransferAgreement, Subcorpus::PublicData}) {
    for (const auto& r : rows(sc)) line(to_string(sc), r.genre, r.counts);
    line(to_string(sc), "Subtotal", subtotal(sc));
  }
  line("", "Total", total());
  return out.str();
}

CorpusStats stats(std::span<const Document> corpus) {
  CorpusStats s;
  for (const auto& d : corpus) s.add(d);
  return s;
}

CorpusStats stats_from_jsonl(const std::filesystem::path& path, std::size_t* malformed) {
  std::ifstream in(path);
  if (!in || std::filesystem::is_directory(path)) throw std::runtime_error("cannot read corpus: " + path.string());
  CorpusStats s;
  std::size_t bad = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (auto doc = parse_document(line)) {
      s.add(*doc);
      continue;
    }
    auto j = nlohmann::json::parse(line, nullptr, false);
    const bool row = j.is_object() && j.contains("subcorpus") && j["subcorpus"].is_string() && j.contains("genre") &&
                     j["genre"].is_string() && j.contains("tokens") && j["tokens"].is_number_unsigned() &&
                     j.contains("documents") && j["documents"].is_number_unsigned();
    if (!row) {
      ++bad;
      continue;
    }
    try {
      s.add(subcorpus_from_string(j["subcorpus"].get<std::string>()), j["genre"].get<std::string>(),
            {j["tokens"].get<std::uint64_t>(), j["documents"].get<std::uint64_t>()});
    } catch (const DataError&) {
      ++bad;
    }
  }
  if (malformed) *malformed = bad;
  return s;
}

// ---------------------------------------------------------------- split

Split split(std::span<const Document> corpus, double heldout_fraction, std::uint64_t seed) {
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) {
    throw std::invalid_argument("held-out fraction must be in (0, 1)");
  }
  if (corpus.empty()) throw std::invalid_argument("cannot split an empty corpus");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_held = static_cast<std::size_t>(std::llround(heldout_fraction * static_cast<double>(corpus.size())));
  std::vector<bool> held(corpus.size(), false);
  for (std::size_t i = 0; i < n_held; ++i) held[order[i]] = true;
  Split out;
  for (std::size_t i = 0; i < corpus.size(); ++i) (held[i] ? out.heldout : out.train).push_back(corpus[i]);
  return out;
}

}  // namespace ltx::corpus
