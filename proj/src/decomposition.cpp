#include "visphrase/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "parse.hpp"
#include "visphrase/error.hpp"
#include "visphrase/linalg.hpp"
#include "visphrase/projection.hpp"

namespace visphrase {

PhraseTrainingSet::PhraseTrainingSet(std::vector<PhraseTriple> triples,
                                     const EmbeddingSpace& phrase_space,
                                     const EmbeddingSpace& word_space)
    : triples_(std::move(triples)), phrase_space_(&phrase_space), word_space_(&word_space) {
  if (triples_.empty()) throw ContractError("phrase training set is empty");
  if (phrase_space_->dim() != word_space_->dim())
    throw ContractError("phrase and word spaces have different dimensions");
  for (const auto& t : triples_) {
    if (!phrase_space_->contains(t.phrase))
      throw ContractError("phrase not in phrase space: " + t.phrase);
    if (!word_space_->contains(t.adjective))
      throw ContractError("adjective not in word space: " + t.adjective);
    if (!word_space_->contains(t.noun)) throw ContractError("noun not in word space: " + t.noun);
  }
}

Eigen::MatrixXd PhraseTrainingSet::phrase_matrix() const {
  Eigen::MatrixXd m(dim(), static_cast<Eigen::Index>(triples_.size()));
  for (std::size_t i = 0; i < triples_.size(); ++i)
    m.col(static_cast<Eigen::Index>(i)) = phrase_space_->vector(triples_[i].phrase);
  return m;
}

Eigen::MatrixXd PhraseTrainingSet::pair_matrix() const {
  const int d = dim();
  Eigen::MatrixXd m(2 * d, static_cast<Eigen::Index>(triples_.size()));
  for (std::size_t i = 0; i < triples_.size(); ++i) {
    m.col(static_cast<Eigen::Index>(i)).head(d) = word_space_->vector(triples_[i].adjective);
    m.col(static_cast<Eigen::Index>(i)).tail(d) = word_space_->vector(triples_[i].noun);
  }
  return m;
}

PhraseTrainingSet balance_training(const PhraseTrainingSet& set, std::size_t cap) {
  if (cap == 0) throw ContractError("balance cap must be positive");
  std::unordered_map<std::string, std::size_t> adj_count, noun_count;
  std::vector<PhraseTriple> kept;
  for (const auto& t : set.triples()) {
    if (adj_count[t.adjective] < cap && noun_count[t.noun] < cap) {
      kept.push_back(t);
      ++adj_count[t.adjective];
      ++noun_count[t.noun];
    }
  }
  if (kept.empty()) throw ContractError("balancing removed every triple");
  return PhraseTrainingSet(std::move(kept), set.phrase_space(), set.word_space());
}

DecompositionModel::DecompositionModel(Eigen::MatrixXd coeffs, double lambda,
                                       std::vector<double> grid, std::vector<double> grid_scores)
    : coeffs_(std::move(coeffs)),
      lambda_(lambda),
      grid_(std::move(grid)),
      grid_scores_(std::move(grid_scores)) {
  if (coeffs_.rows() != 2 * coeffs_.cols())
    throw ContractError("decomposition coefficients must be 2d x d");
}

DecompositionModel::Parts DecompositionModel::decompose(const Eigen::VectorXd& phrase) const {
  if (coeffs_.size() == 0) throw StateError("decomposition model is empty");
  if (phrase.size() != coeffs_.cols())
    throw ContractError("decompose: phrase dimension mismatch");
  const Eigen::VectorXd stacked = coeffs_ * phrase;
  const Eigen::Index d = coeffs_.cols();
  return Parts{stacked.head(d), stacked.tail(d)};
}

nlohmann::json DecompositionModel::to_json() const {
  nlohmann::json j;
  j["format"] = "visphrase-decomposition";
  j["version"] = kLibraryVersion;
  j["rows"] = coeffs_.rows();
  j["cols"] = coeffs_.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(coeffs_.size()));
  for (Eigen::Index r = 0; r < coeffs_.rows(); ++r)
    for (Eigen::Index c = 0; c < coeffs_.cols(); ++c) data.push_back(coeffs_(r, c));
  j["data"] = std::move(data);
  j["lambda"] = lambda_;
  j["grid"] = grid_;
  j["grid_scores"] = grid_scores_;
  return j;
}

DecompositionModel DecompositionModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "visphrase-decomposition")
      throw FormatError("not a decomposition model payload");
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows != 2 * cols || static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw FormatError("decomposition payload shape mismatch");
    Eigen::MatrixXd coeffs(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) coeffs(r, c) = data[k++];
    return DecompositionModel(std::move(coeffs), j.at("lambda").get<double>(),
                              j.at("grid").get<std::vector<double>>(),
                              j.at("grid_scores").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("decomposition model payload: ") + e.what());
  }
}

namespace {

// Generalized cross-validation for ridge, evaluated from one SVD of the
// inputs: GCV(l) = n * RSS(l) / (n - tr H(l))^2 with
// tr H(l) = sum_i s_i^2 / (s_i^2 + l). RSS comes from the identity
// RSS(l) = ||T||^2 - sum_i (2 f_i - f_i^2) * ||(T V)_i||^2,
// f_i = s_i^2 / (s_i^2 + l).
double gcv_score(double lambda, const Eigen::VectorXd& sigma, const Eigen::VectorXd& tv_sq,
                 double targets_sq, double n) {
  double rss = targets_sq;
  double trace_h = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    const double s2 = sigma(i) * sigma(i);
    const double f = s2 / (s2 + lambda);
    trace_h += f;
    rss -= (2.0 * f - f * f) * tv_sq(i);
  }
  rss = std::max(rss, 0.0);
  const double denom = n - trace_h;
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return n * rss / (denom * denom);
}

}  // namespace

DecompositionModel train_dec(const PhraseTrainingSet& set, std::optional<double> lambda,
                             const std::vector<double>& grid_in) {
  const Eigen::MatrixXd inputs = set.phrase_matrix();
  const Eigen::MatrixXd targets = set.pair_matrix();
  const auto svd = linalg::thin_svd(inputs);

  double chosen;
  std::vector<double> grid, scores;
  if (lambda) {
    if (*lambda < 0.0 || !std::isfinite(*lambda))
      throw ContractError("lambda must be finite and >= 0");
    chosen = *lambda;
  } else {
    grid = grid_in.empty() ? default_lambda_grid() : grid_in;
    const Eigen::MatrixXd tv = targets * svd.v;  // projection onto the sample-side SVD basis
    Eigen::VectorXd tv_sq(tv.cols());
    for (Eigen::Index i = 0; i < tv.cols(); ++i) tv_sq(i) = tv.col(i).squaredNorm();
    const double targets_sq = targets.squaredNorm();
    const double n = static_cast<double>(set.size());
    scores.reserve(grid.size());
    std::size_t best = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      if (grid[g] < 0.0 || !std::isfinite(grid[g]))
        throw ContractError("lambda must be finite and >= 0");
      scores.push_back(gcv_score(grid[g], svd.sigma, tv_sq, targets_sq, n));
      if (scores[g] < scores[best]) best = g;
    }
    chosen = grid[best];
  }

  auto sol = linalg::ridge_solve(targets, svd, chosen, inputs.rows());
  return DecompositionModel(std::move(sol.coeffs), chosen, std::move(grid), std::move(scores));
}

std::vector<PhraseTriple> load_triples(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  std::vector<PhraseTriple> triples;
  for (const auto& line : detail::data_lines(text)) {
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 3)
      throw FormatError(path.string() + ": expected 3 tab-separated fields, got '" +
                        std::string(line) + "'");
    for (const auto& f : fields)
      if (f.empty()) throw FormatError(path.string() + ": empty field in '" + std::string(line) + "'");
    triples.push_back(
        {std::string(fields[0]), std::string(fields[1]), std::string(fields[2])});
  }
  if (triples.empty()) throw FormatError(path.string() + ": no triples");
  return triples;
}

void save_decomposition_model(const DecompositionModel& model,
                              const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << model.to_json().dump(2) << '\n';
}

DecompositionModel load_decomposition_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("decomposition model parse: ") + e.what());
  }
  return DecompositionModel::from_json(j);
}

}  // namespace visphrase
