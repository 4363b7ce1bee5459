#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "visphrase/embedding.hpp"
#include "visphrase/labeling.hpp"
#include "visphrase/types.hpp"

namespace visphrase {

struct GoldAnnotation {
  std::string image_id;
  LabelSet gold_adjectives;  // non-empty
  std::optional<std::string> gold_noun;
};

// Gold file rows: "image_id\tnoun\tadj1,adj2,...". A '-' noun means no
// gold noun.
std::vector<GoldAnnotation> load_gold(const std::filesystem::path& path);

struct KMetrics {
  double hit_percent = 0.0;
  double recall_percent = 0.0;
};

// Percentage of images whose top-k contains at least one gold label,
// per k. Rankings and gold are aligned by image_id; any mismatch
// raises AlignmentError naming the offenders.
std::map<int, double> hit_at_k(const std::vector<Ranking>& rankings,
                               const std::vector<GoldAnnotation>& gold,
                               const std::vector<int>& ks);

// Per-image fraction of gold labels inside the top-k, averaged over
// images, as a percentage.
std::map<int, double> recall_at_k(const std::vector<Ranking>& rankings,
                                  const std::vector<GoldAnnotation>& gold,
                                  const std::vector<int>& ks);

// Area under the ROC curve by the rank statistic: the fraction of
// (positive, negative) pairs scored in the right order, ties worth
// half. Throws NumericError unless both classes are present.
double auc(const std::vector<std::pair<std::string, double>>& scores,
           const LabelSet& positives);

// Arithmetic mean of the attribute's 1-based rank across rankings.
// The attribute must appear in every ranking.
double mean_attribute_rank(const std::vector<Ranking>& rankings, const std::string& attribute);

enum class CorrelationKind { Spearman, Pearson };

struct StructureCorrelation {
  double rho = 0.0;
  double p_value = 1.0;  // one-sided, rho > 0
  int permutations = 0;
};

// Correlation between the two spaces' pairwise-cosine vectors over the
// shared labels, with a permutation-test p-value obtained by shuffling
// one space's label assignment. Needs at least 3 shared labels.
StructureCorrelation structure_correlation(const EmbeddingSpace& space_a,
                                           const EmbeddingSpace& space_b,
                                           const std::vector<std::string>& shared,
                                           CorrelationKind kind = CorrelationKind::Spearman,
                                           int permutations = 1000, std::uint64_t seed = 0);

struct ConcretenessResult {
  double score = 0.0;
  std::vector<std::string> excluded;  // top-n adjectives with no usable noun
  bool defined = false;
};

// Image concreteness: mean over the top-n ranked adjectives of each
// adjective's co-occurrence-weighted mean modified-noun concreteness.
// Adjectives with no modified noun of known concreteness are excluded;
// when all are excluded, `defined` stays false.
ConcretenessResult concreteness_score(const Ranking& ranking,
                                      const std::unordered_map<std::string, double>& noun_concreteness,
                                      const ModifierCooc& cooc, int top_n = 5);

struct EvalReport {
  std::map<int, KMetrics> per_k;
  std::map<std::string, double> per_attribute_auc;
  std::map<std::string, std::string> metadata;  // model id, candidate sizes, config hash

  nlohmann::json to_json() const;
  // Aligned plain-text rendering of the same numbers.
  std::string to_table() const;
};

}  // namespace visphrase
