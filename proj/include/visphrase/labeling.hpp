#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "visphrase/decomposition.hpp"
#include "visphrase/embedding.hpp"
#include "visphrase/projection.hpp"
#include "visphrase/types.hpp"

namespace visphrase {

// Corpus counts backing the text-only scorers: unigram counts shared by
// adjectives and nouns, plus (adjective, noun) bigram counts.
class BigramTable {
 public:
  BigramTable() = default;
  BigramTable(std::unordered_map<std::string, std::uint64_t> unigram_counts,
              std::unordered_map<std::string, std::uint64_t> bigram_counts);

  // TSV with section markers:
  //   [unigrams]  "word\tcount"
  //   [bigrams]   "adjective\tnoun\tcount"
  static BigramTable load(const std::filesystem::path& path);

  std::uint64_t unigram_count(const std::string& word) const;
  std::uint64_t bigram_count(const std::string& adjective, const std::string& noun) const;
  std::uint64_t total_unigrams() const { return total_unigrams_; }

 private:
  std::unordered_map<std::string, std::uint64_t> unigram_counts_;
  std::unordered_map<std::string, std::uint64_t> bigram_counts_;  // key "adjective\tnoun"
  std::uint64_t total_unigrams_ = 0;
};

// Modifier co-occurrence counts: how often each adjective modified each
// noun. File rows are "noun\tadj\tcount".
class ModifierCooc {
 public:
  ModifierCooc() = default;
  explicit ModifierCooc(
      std::unordered_map<std::string, std::vector<std::pair<std::string, std::uint64_t>>> by_noun);

  static ModifierCooc load(const std::filesystem::path& path);

  bool has_noun(const std::string& noun) const;
  // Adjectives that modified `noun`, with counts, in insertion order.
  const std::vector<std::pair<std::string, std::uint64_t>>& modifiers(
      const std::string& noun) const;
  std::vector<std::string> nouns() const;

 private:
  std::unordered_map<std::string, std::vector<std::pair<std::string, std::uint64_t>>> by_noun_;
};

inline constexpr double kStupidBackoffAlpha = 0.4;

// Corpus-frequency ranking of candidate adjectives for a noun:
// count(adjective, noun) / count(noun) when the bigram was seen,
// otherwise alpha * count(adjective) / total unigrams. Depends only on
// the noun, never on the image. Returns the full sorted candidate set.
Ranking lm_rank(const BigramTable& table, const std::string& noun,
                const std::vector<std::string>& candidates, std::string query_id = "");

// Prototype ranking: candidates ordered by cosine to the mean of the
// length-normalized vectors of adjectives that modified the noun more
// than `threshold` times (strict). Throws NoPrototypeError when no
// adjective qualifies, ContractError when the noun is absent.
Ranking sp_rank(const ModifierCooc& cooc, const EmbeddingSpace& space, const std::string& noun,
                const std::vector<std::string>& candidates, std::uint64_t threshold = 20,
                std::string query_id = "");

// Rank fusion: score = -(rank_a + rank_b)/2 over the shared candidate
// set, so smaller mean rank sorts first; ties break lexicographically.
// Throws ContractError when the two rankings cover different sets.
Ranking vlm_rank(const Ranking& a, const Ranking& b, std::string query_id = "");

// Direct projection annotation: map the image vector, return the k
// nearest labels, optionally filtered by part of speech.
Ranking annotate_direct(const ProjectionModel& model, const EmbeddingSpace& retrieval,
                        const Eigen::VectorXd& image, int k,
                        std::optional<Pos> pos_filter = std::nullopt,
                        const LabelSet* restrict_to = nullptr, std::string query_id = "");

// Decomposition annotation: project, split into adjective and noun
// vectors, then run one nearest search per constituent. Part-of-speech
// purity comes from the space's tags or from the restriction sets; at
// least one of the two must be available per constituent.
struct DecAnnotation {
  Ranking adjectives;
  Ranking nouns;
};
DecAnnotation annotate_dec(const ProjectionModel& model, const DecompositionModel& dec,
                           const EmbeddingSpace& word_space, const Eigen::VectorXd& image,
                           int k_adjectives, int k_nouns,
                           const LabelSet* adjective_pool = nullptr,
                           const LabelSet* noun_pool = nullptr, std::string query_id = "");

}  // namespace visphrase
