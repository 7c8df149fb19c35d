// Vocabulary transplant: keep embedding rows of tokens shared by the source and
// target vocabularies, and initialise every other target row with the mean of all
// source rows.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ltx/checkpoint.hpp"
#include "ltx/tokenizer.hpp"

namespace ltx::transplant {

template <typename Scalar>
using EmbeddingMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// For each target id, the source id holding the identical byte string, or nullopt (NEW).
struct VocabAlignment {
  std::vector<std::optional<TokenId>> mapping;
  std::size_t source_size = 0;
  std::size_t n_shared = 0;
  std::size_t n_new = 0;

  std::size_t target_size() const { return mapping.size(); }
};

VocabAlignment align_tokens(std::span<const std::string> source, std::span<const std::string> target);
VocabAlignment align_vocabs(const tokenizer::Vocab& source, const tokenizer::Vocab& target);

/// Column-wise mean over all rows, accumulated in double in row order.
template <typename Scalar>
Eigen::RowVectorXd mean_row(const EmbeddingMatrix<Scalar>& m) {
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) sum += m.row(r).template cast<double>();
  return sum / static_cast<double>(m.rows());
}

/// Shared rows are copied bit for bit; NEW rows all receive the source mean row,
/// rounded once to Scalar. Throws std::invalid_argument if src.rows() does not
/// match the alignment's source size.
template <typename Scalar>
EmbeddingMatrix<Scalar> transplant_embeddings(const EmbeddingMatrix<Scalar>& src, const VocabAlignment& align) {
  if (static_cast<std::size_t>(src.rows()) != align.source_size) {
    throw std::invalid_argument("embedding has " + std::to_string(src.rows()) + " rows but the source vocabulary has " +
                                std::to_string(align.source_size) + " tokens");
  }
  if (src.rows() == 0) throw std::invalid_argument("cannot transplant an empty embedding");
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mean = mean_row(src).template cast<Scalar>();
  EmbeddingMatrix<Scalar> out(static_cast<Eigen::Index>(align.target_size()), src.cols());
  for (std::size_t t = 0; t < align.mapping.size(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    if (const auto s = align.mapping[t]) {
      out.row(row) = src.row(static_cast<Eigen::Index>(*s));
    } else {
      out.row(row) = mean;
    }
  }
  return out;
}

enum class TiePolicy {
  FollowCheckpoint,  // tied: one shared matrix; untied: head gets the same surgery
  ForceTied,         // drop an untied head and tie the output to the new embedding
};

struct TransplantReport {
  std::size_t n_shared = 0;
  std::size_t n_new = 0;
  std::size_t source_vocab_size = 0;
  std::size_t target_vocab_size = 0;
  double mean_vector_norm = 0.0;
  bool head_transplanted = false;
};

nlohmann::ordered_json to_json(const TransplantReport& r);

struct TransplantResult {
  Checkpoint checkpoint;
  TransplantReport report;
};

/// Rebuilds the token embedding (and an untied head) for the target vocabulary,
/// copies every other parameter unchanged and resets the optimizer state.
TransplantResult transplant_model(const Checkpoint& src, const tokenizer::Vocab& src_tok,
                                  const tokenizer::Vocab& tgt_tok, TiePolicy policy = TiePolicy::FollowCheckpoint);

}  // namespace ltx::transplant
