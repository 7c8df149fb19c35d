#include "ltx/transplant.hpp"

#include <unordered_map>

namespace ltx::transplant {

VocabAlignment align_tokens(std::span<const std::string> source, std::span<const std::string> target) {
  std::unordered_map<std::string_view, TokenId> index;
  index.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) index.emplace(source[i], static_cast<TokenId>(i));
  VocabAlignment a;
  a.source_size = source.size();
  a.mapping.reserve(target.size());
  for (const auto& tok : target) {
    if (auto it = index.find(tok); it != index.end()) {
      a.mapping.emplace_back(it->second);
      ++a.n_shared;
    } else {
      a.mapping.emplace_back(std::nullopt);
      ++a.n_new;
    }
  }
  return a;
}

VocabAlignment align_vocabs(const tokenizer::Vocab& source, const tokenizer::Vocab& target) {
  return align_tokens(source.tokens(), target.tokens());
}

nlohmann::ordered_json to_json(const TransplantReport& r) {
  return {{"n_shared", r.n_shared},
          {"n_new", r.n_new},
          {"source_vocab_size", r.source_vocab_size},
          {"target_vocab_size", r.target_vocab_size},
          {"mean_vector_norm", r.mean_vector_norm},
          {"head_transplanted", r.head_transplanted}};
}

TransplantResult transplant_model(const Checkpoint& src, const tokenizer::Vocab& src_tok,
                                  const tokenizer::Vocab& tgt_tok, TiePolicy policy) {
  const auto& params = src.model.params;
  if (static_cast<std::size_t>(params.tok_emb.rows()) != src_tok.size() ||
      src.config().vocab_size != src_tok.size()) {
    throw DataError("checkpoint vocabulary (" + std::to_string(src.config().vocab_size) +
                    ") does not match the source tokenizer (" + std::to_string(src_tok.size()) + ")");
  }
  const auto align = align_vocabs(src_tok, tgt_tok);

  auto cfg = src.config();
  cfg.vocab_size = tgt_tok.size();
  const bool keep_head = !params.tied() && policy == TiePolicy::FollowCheckpoint;
  cfg.tie_embeddings = !keep_head;

  Checkpoint out{{cfg, params}, train::zero_state<float>(cfg)};
  out.model.params.tok_emb = transplant_embeddings<float>(params.tok_emb, align);
  out.model.params.lm_head.resize(0, 0);
  if (keep_head) out.model.params.lm_head = transplant_embeddings<float>(params.lm_head, align);

  TransplantReport report;
  report.n_shared = align.n_shared;
  report.n_new = align.n_new;
  report.source_vocab_size = align.source_size;
  report.target_vocab_size = align.target_size();
  report.mean_vector_norm = mean_row(params.tok_emb).norm();
  report.head_transplanted = keep_head;
  return {std::move(out), report};
}

}  // namespace ltx::transplant
