#include "visphrase/preprocess.hpp"

#include <cmath>

#include "parse.hpp"
#include "visphrase/error.hpp"
#include "visphrase/linalg.hpp"

namespace visphrase {

CountMatrix load_count_matrix(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  const auto lines = detail::data_lines(text);
  if (lines.size() < 2) {
    throw FormatError(path.string() + ": need a header row and at least one data row");
  }
  const auto header = detail::split(lines[0], '\t');
  // Header may lead with an empty corner cell above the row-label column.
  std::size_t first_col = (!header.empty() && header[0].empty()) ? 1 : 0;
  CountMatrix m;
  for (std::size_t i = first_col; i < header.size(); ++i) {
    m.col_labels.emplace_back(header[i]);
  }
  if (m.col_labels.empty()) throw FormatError(path.string() + ": no feature columns");

  const std::size_t cols = m.col_labels.size();
  m.values.resize(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = detail::split(lines[r], '\t');
    if (fields.size() != cols + 1) {
      throw FormatError(path.string() + ": row '" + std::string(fields.empty() ? lines[r] : fields[0]) +
                        "' has " + std::to_string(fields.size() - 1) + " values, expected " +
                        std::to_string(cols));
    }
    m.row_labels.emplace_back(fields[0]);
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = detail::parse_double(fields[c + 1], path.string());
      if (v < 0.0) throw FormatError(path.string() + ": negative count in row '" +
                                     std::string(fields[0]) + "'");
      m.values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return m;
}

CountMatrix ppmi(const CountMatrix& m) {
  const double total = m.values.sum();
  if (!(total > 0.0)) throw NumericError("ppmi: all-zero count matrix");
  if ((m.values.array() < 0.0).any()) throw ContractError("ppmi: counts must be non-negative");

  const Eigen::VectorXd row_sums = m.values.rowwise().sum();
  const Eigen::VectorXd col_sums = m.values.colwise().sum();

  CountMatrix out;
  out.row_labels = m.row_labels;
  out.col_labels = m.col_labels;
  out.values = Eigen::MatrixXd::Zero(m.values.rows(), m.values.cols());
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      const double c = m.values(i, j);
      if (c <= 0.0) continue;  // zero cells stay zero
      const double pmi = std::log(c * total / (row_sums(i) * col_sums(j)));
      out.values(i, j) = std::max(0.0, pmi);
    }
  }
  return out;
}

SvdReduction svd_reduce(const Eigen::MatrixXd& m, int k) {
  if (k < 1) throw ContractError("svd_reduce: k must be positive");
  if (k > std::min(m.rows(), m.cols())) {
    throw ContractError("svd_reduce: k exceeds min(rows, cols)");
  }
  const linalg::ThinSvd svd = linalg::thin_svd(m);
  const int rank = linalg::numerical_rank(svd.sigma, m.rows(), m.cols());
  const int kept = std::min(k, rank);

  SvdReduction out;
  out.reduced = Eigen::MatrixXd::Zero(m.rows(), k);
  out.basis = Eigen::MatrixXd::Zero(m.cols(), k);
  out.singular_values = Eigen::VectorXd::Zero(k);
  out.reduced.leftCols(kept) =
      svd.u.leftCols(kept) * svd.sigma.head(kept).asDiagonal();
  out.basis.leftCols(kept) = svd.v.leftCols(kept);
  out.singular_values.head(kept) = svd.sigma.head(kept);
  out.rank_deficient = (kept < k);
  return out;
}

EmbeddingSpace build_visual_space(const CountMatrix& counts, int k) {
  const CountMatrix weighted = ppmi(counts);
  const SvdReduction reduction = svd_reduce(weighted.values, k);
  return EmbeddingSpace(counts.row_labels, reduction.reduced);
}

}  // namespace visphrase
