#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "visphrase/decomposition.hpp"
#include "visphrase/embedding.hpp"
#include "visphrase/preprocess.hpp"
#include "visphrase/projection.hpp"

namespace visphrase {

// Per-image adjective appropriateness weights over a fixed adjective
// vocabulary, sparsified at the stored threshold: surviving entries are
// >= sparsity_threshold, the rest are exactly 0.
struct AttributeVector {
  std::string image_id;
  Eigen::VectorXd values;  // indexed like the adjective vocabulary
  double sparsity_threshold = 0.0;
};

// Cosine of `query` against every row of `adjectives`, in row order.
Eigen::VectorXd adjective_cosines(const EmbeddingSpace& adjectives, const Eigen::VectorXd& query);

// Zeroes every entry strictly below the threshold; entries equal to it
// survive.
Eigen::VectorXd sparsify(const Eigen::VectorXd& values, double threshold);

enum class SparsityScope { PerImage, Global };

// Project, decompose, then score the adjective constituent against the
// whole adjective vocabulary; sparsify at this image's mean cosine.
// A Global scope caller computes its own threshold and passes it via
// attribute_vector_with_threshold.
AttributeVector attribute_vector(const ProjectionModel& proj, const DecompositionModel& dec,
                                 const EmbeddingSpace& adjectives, const Eigen::VectorXd& image,
                                 std::string image_id = "");
AttributeVector attribute_vector_with_threshold(const ProjectionModel& proj,
                                                const DecompositionModel& dec,
                                                const EmbeddingSpace& adjectives,
                                                const Eigen::VectorXd& image, double threshold,
                                                std::string image_id = "");
// The raw (pre-sparsification) cosines for an image, for Global-scope
// threshold computation.
Eigen::VectorXd raw_attribute_cosines(const ProjectionModel& proj, const DecompositionModel& dec,
                                      const EmbeddingSpace& adjectives,
                                      const Eigen::VectorXd& image);

// SVD basis fitted on training-set concatenated features; test items
// fold in by right multiplication.
class FusionBasis {
 public:
  FusionBasis() = default;

  // Rows of `training` are concatenated feature vectors.
  void fit(const Eigen::MatrixXd& training, int target_dim);
  bool fitted() const { return basis_.size() > 0; }
  int input_dim() const { return static_cast<int>(basis_.rows()); }
  int target_dim() const { return static_cast<int>(basis_.cols()); }

  // Throws StateError before fit, ContractError on dimension mismatch.
  Eigen::VectorXd fold_in(const Eigen::VectorXd& concatenated) const;

  nlohmann::json to_json() const;
  static FusionBasis from_json(const nlohmann::json& j);

 private:
  Eigen::MatrixXd basis_;  // input_dim x target_dim
};

// Concatenates raw visual features with the attribute vector and folds
// the result into the fitted basis.
Eigen::VectorXd fuse(const FusionBasis& basis, const Eigen::VectorXd& raw,
                     const AttributeVector& attr);

struct OvaOptions {
  double regularization = 1e-3;
  int epochs = 200;
  double eta0 = 1.0;
  std::uint64_t seed = 0;
};

// One-vs-all linear classifier bank trained by seeded stochastic
// subgradient descent on the L2-regularized hinge loss. Classes are
// kept sorted; prediction ties resolve to the lexicographically
// smallest class.
class LinearClassifier {
 public:
  LinearClassifier() = default;
  LinearClassifier(std::vector<std::string> classes, Eigen::MatrixXd weights,
                   Eigen::VectorXd biases, OvaOptions options);

  const std::vector<std::string>& classes() const { return classes_; }
  int feature_dim() const { return static_cast<int>(weights_.cols()); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& biases() const { return biases_; }
  const OvaOptions& options() const { return options_; }

  std::string predict(const Eigen::VectorXd& features) const;
  Eigen::VectorXd scores(const Eigen::VectorXd& features) const;

  nlohmann::json to_json() const;
  static LinearClassifier from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> classes_;
  Eigen::MatrixXd weights_;  // classes x feature dim
  Eigen::VectorXd biases_;
  OvaOptions options_;
};

struct LabeledExample {
  Eigen::VectorXd features;
  std::string label;
};

LinearClassifier train_ova(const std::vector<LabeledExample>& examples,
                           const OvaOptions& options = {});

struct ConfusionResult {
  std::vector<std::string> classes;
  Eigen::MatrixXd proportions;  // row-normalized: gold rows, predicted columns
  double accuracy = 0.0;        // fraction in [0, 1]
};

ConfusionResult confusion_matrix(const LinearClassifier& clf,
                                 const std::vector<LabeledExample>& test);

// Sparse persistence: "image_id\tadjective\tvalue" rows for nonzero
// entries. Each image also gets one "image_id\t\tthreshold" row (empty
// adjective field) carrying its sparsity threshold, which doubles as a
// presence marker for images whose entries were all zeroed.
void save_attribute_vectors(const std::vector<AttributeVector>& vectors,
                            const std::vector<std::string>& adjective_vocab,
                            const std::filesystem::path& path);
std::vector<AttributeVector> load_attribute_vectors(const std::filesystem::path& path,
                                                    const std::vector<std::string>& adjective_vocab);

void save_classifier(const LinearClassifier& clf, const std::filesystem::path& path);
LinearClassifier load_classifier(const std::filesystem::path& path);

}  // namespace visphrase
