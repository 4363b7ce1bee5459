#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "visphrase/embedding.hpp"

namespace visphrase {

// One (phrase, adjective, noun) training instance, all living in the
// same linguistic space.
struct PhraseTriple {
  std::string phrase;
  std::string adjective;
  std::string noun;
};

// Validated triple collection: every constituent must be present in the
// given spaces and all three spaces must share one dimension.
class PhraseTrainingSet {
 public:
  PhraseTrainingSet(std::vector<PhraseTriple> triples, const EmbeddingSpace& phrase_space,
                    const EmbeddingSpace& word_space);

  std::size_t size() const { return triples_.size(); }
  const std::vector<PhraseTriple>& triples() const { return triples_; }
  const EmbeddingSpace& phrase_space() const { return *phrase_space_; }
  const EmbeddingSpace& word_space() const { return *word_space_; }
  int dim() const { return word_space_->dim(); }

  // Phrase vectors stacked as columns, d x n.
  Eigen::MatrixXd phrase_matrix() const;
  // Concatenated [adjective; noun] vectors stacked as columns, 2d x n.
  Eigen::MatrixXd pair_matrix() const;

 private:
  std::vector<PhraseTriple> triples_;
  const EmbeddingSpace* phrase_space_;
  const EmbeddingSpace* word_space_;
};

// Keeps a triple only while both its adjective and its noun have been
// seen fewer than `cap` times so far, scanning in input order.
PhraseTrainingSet balance_training(const PhraseTrainingSet& set, std::size_t cap = 100);

// Linear map from a phrase vector to stacked (adjective, noun) vectors.
class DecompositionModel {
 public:
  DecompositionModel() = default;
  DecompositionModel(Eigen::MatrixXd coeffs, double lambda, std::vector<double> grid,
                     std::vector<double> grid_scores);

  int dim() const { return static_cast<int>(coeffs_.cols()); }
  const Eigen::MatrixXd& coeffs() const { return coeffs_; }
  double lambda() const { return lambda_; }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& grid_scores() const { return grid_scores_; }

  // Splits the 2d output into its halves.
  struct Parts {
    Eigen::VectorXd adjective;
    Eigen::VectorXd noun;
  };
  Parts decompose(const Eigen::VectorXd& phrase) const;

  nlohmann::json to_json() const;
  static DecompositionModel from_json(const nlohmann::json& j);

 private:
  Eigen::MatrixXd coeffs_;  // 2d x d
  double lambda_ = 0.0;
  std::vector<double> grid_;
  std::vector<double> grid_scores_;
};

// Ridge fit of the decomposition map. lambda == nullopt selects the
// penalty by generalized cross-validation over the grid (the default
// grid when empty).
DecompositionModel train_dec(const PhraseTrainingSet& set, std::optional<double> lambda,
                             const std::vector<double>& grid = {});

// Triples file: "phrase_label\tadj_label\tnoun_label" per line.
std::vector<PhraseTriple> load_triples(const std::filesystem::path& path);

void save_decomposition_model(const DecompositionModel& model, const std::filesystem::path& path);
DecompositionModel load_decomposition_model(const std::filesystem::path& path);

}  // namespace visphrase
