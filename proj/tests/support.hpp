// Helpers shared by the unit tests and the acceptance binary.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ltx/corpus.hpp"
#include "ltx/human_eval.hpp"
#include "ltx/model.hpp"
#include "ltx/tokenizer.hpp"

namespace ltx::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::filesystem::path data_path(const std::string& name);

/// Toy languages 'A' and 'B': sentences "DET NOUN VERB DET ADJ NOUN." drawn from two
/// small lexicons that share some words.
std::string synthetic_sentence(char language, std::uint64_t& state);
std::vector<corpus::Document> synthetic_corpus(char language, std::size_t n_docs, std::size_t sentences_per_doc,
                                               std::uint64_t seed, std::string_view genre = "prose");

/// 2 layers, 2 heads, d_model 8, d_ff 32, context 16.
nn::ModelConfig toy_config(std::size_t vocab_size, bool tied = true);

/// Random code points from several planes (no surrogates).
std::string random_unicode(std::uint64_t& state, std::size_t max_code_points);

std::uint64_t splitmix(std::uint64_t& state);

/// n base texts cut from synthetic documents with counterbalanced strategies; the
/// synthetic version is a shortened reshuffle tagged with model "toy".
std::vector<humeval::BaseText> demo_bases(std::size_t n, std::uint64_t seed);

/// Every broken Latin-square property, empty when the design is sound.
std::vector<std::string> latin_square_violations(const humeval::Experiment& e,
                                                 std::span<const humeval::BaseText> bases);

}  // namespace ltx::testing
