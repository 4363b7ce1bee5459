#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "visphrase/embedding.hpp"

namespace visphrase {

// Raw item-by-feature counts (e.g. bag-of-visual-words histograms).
struct CountMatrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Eigen::MatrixXd values;  // non-negative, row_labels.size() x col_labels.size()
};

// TSV with a header row of feature labels; data rows "label\tc1\t...\tcn".
CountMatrix load_count_matrix(const std::filesystem::path& path);

// Positive pointwise mutual information:
//   out[i,j] = max(0, ln(m[i,j] * total / (row_sum_i * col_sum_j)))
// Zero cells stay zero. Throws NumericError on an all-zero matrix.
CountMatrix ppmi(const CountMatrix& m);

struct SvdReduction {
  Eigen::MatrixXd reduced;          // rows x k, the U_k * Sigma_k coordinates
  Eigen::MatrixXd basis;            // cols x k; fold in a held-out row r as r * basis
  Eigen::VectorXd singular_values;  // k values, non-increasing
  // Set when k exceeded the numerical rank; trailing columns are zero.
  bool rank_deficient = false;
};

// Rank-k truncated SVD. Requires k <= min(rows, cols).
SvdReduction svd_reduce(const Eigen::MatrixXd& m, int k);

// PPMI followed by rank-k SVD; row labels become the space labels.
EmbeddingSpace build_visual_space(const CountMatrix& counts, int k);

}  // namespace visphrase
