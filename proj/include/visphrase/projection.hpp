#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "visphrase/embedding.hpp"

namespace visphrase {

// Aligned (source vector, target label) pairs for cross-modal training.
// Duplicate target labels are allowed: many images may share a word.
class PairedDataset {
 public:
  PairedDataset(std::vector<Eigen::VectorXd> sources, std::vector<std::string> target_labels,
                const EmbeddingSpace& target_space);

  std::size_t size() const { return target_labels_.size(); }
  int source_dim() const { return source_dim_; }
  int target_dim() const { return target_space_->dim(); }
  const EmbeddingSpace& target_space() const { return *target_space_; }
  const std::vector<Eigen::VectorXd>& sources() const { return sources_; }
  const std::vector<std::string>& target_labels() const { return target_labels_; }

  // Stacked column matrices, d x n.
  Eigen::MatrixXd source_matrix() const;
  Eigen::MatrixXd target_matrix() const;

  // The subset at the given pair indices (for cross-validation folds and
  // leave-one-label-out training).
  PairedDataset subset(const std::vector<std::size_t>& indices) const;

 private:
  std::vector<Eigen::VectorXd> sources_;
  std::vector<std::string> target_labels_;
  const EmbeddingSpace* target_space_;
  int source_dim_ = 0;
};

struct RidgeModel {
  Eigen::MatrixXd coeffs;  // target_dim x source_dim
  double lambda = 0.0;
  bool pseudoinverse_fallback = false;
};

// Canonical projection pair. Columns of `target_proj` / `source_proj`
// map centered target / source vectors into the shared canonical space,
// already scaled by correlations^power.
struct NccaModel {
  Eigen::MatrixXd target_proj;   // d2 x c
  Eigen::MatrixXd source_proj;   // d1 x c
  Eigen::VectorXd correlations;  // c, non-increasing
  double power = 0.0;
  Eigen::VectorXd target_mean;   // d2
  Eigen::VectorXd source_mean;   // d1
};

// Hyperparameter search trace kept with a trained model.
struct TrainingInfo {
  int source_dim = 0;
  int target_dim = 0;
  std::size_t pair_count = 0;
  std::vector<double> grid;         // empty when the value was fixed
  std::vector<double> grid_scores;  // CV mean squared error / holdout accuracy
  double chosen = 0.0;
};

class ProjectionModel {
 public:
  static ProjectionModel make_ridge(RidgeModel model, TrainingInfo info);
  static ProjectionModel make_ncca(NccaModel model, TrainingInfo info);

  bool is_ridge() const { return ridge_.has_value(); }
  const RidgeModel& ridge() const;
  const NccaModel& ncca() const;
  const TrainingInfo& info() const { return info_; }

  int source_dim() const;
  // Dimension of project()'s result: target_dim for ridge, the number of
  // canonical components for ncca.
  int output_dim() const;

  nlohmann::json to_json() const;
  static ProjectionModel from_json(const nlohmann::json& j);

 private:
  ProjectionModel() = default;
  std::optional<RidgeModel> ridge_;
  std::optional<NccaModel> ncca_;
  TrainingInfo info_;
};

struct CvOptions {
  std::vector<double> grid;  // empty = default_lambda_grid()
  int folds = 5;
  std::uint64_t seed = 0;
};

struct NccaOptions {
  std::vector<double> power_grid;  // empty = default_power_grid()
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
  // Scale of the ridge added to each covariance: eps = scale * trace(C)/d.
  double covariance_epsilon_scale = 1e-8;
};

// Nine log-spaced values covering 1e-3 .. 1e3.
std::vector<double> default_lambda_grid();
// {0, 0.25, 0.5, 1, 2}
std::vector<double> default_power_grid();

// Closed-form ridge regression from stacked pairs. lambda == nullopt
// selects the penalty from the grid by k-fold cross-validation.
ProjectionModel train_ridge(const PairedDataset& data, std::optional<double> lambda,
                            const CvOptions& cv = {});

// Whitened CCA with correlation-power scaling. power == nullopt tunes
// the exponent on a held-out split by top-1 retrieval accuracy.
ProjectionModel train_ncca(const PairedDataset& data, std::optional<double> power,
                           const NccaOptions& options = {});

// Grid value minimizing mean held-out squared error; ties take the
// smallest value.
double tune_lambda(const PairedDataset& data, const std::vector<double>& grid, int folds,
                   std::uint64_t seed = 0);

// Maps a source vector through the model: F*v for ridge, shared-space
// coordinates for ncca.
Eigen::VectorXd project(const ProjectionModel& model, const Eigen::VectorXd& v);

// Maps a target-space vector into the coordinates project() compares
// against: identity for ridge, shared-space coordinates for ncca.
Eigen::VectorXd embed_target(const ProjectionModel& model, const Eigen::VectorXd& w);

// The space annotation should search: the target space itself for ridge,
// or every entry embedded into the shared canonical space for ncca.
// Part-of-speech tags and frequency ranks carry over.
EmbeddingSpace retrieval_space(const ProjectionModel& model, const EmbeddingSpace& target);

void save_projection_model(const ProjectionModel& model, const std::filesystem::path& path);
ProjectionModel load_projection_model(const std::filesystem::path& path);

}  // namespace visphrase
