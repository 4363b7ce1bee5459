#include "visphrase/projection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "visphrase/error.hpp"
#include "visphrase/linalg.hpp"

namespace visphrase {
namespace {

Eigen::MatrixXd stack_columns(const std::vector<Eigen::VectorXd>& cols, int dim) {
  Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = cols[i];
  return m;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  j["data"] = std::move(data);
  return j;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw FormatError("matrix payload shape mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++];
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

nlohmann::json info_to_json(const TrainingInfo& info) {
  nlohmann::json j;
  j["source_dim"] = info.source_dim;
  j["target_dim"] = info.target_dim;
  j["pair_count"] = info.pair_count;
  j["grid"] = info.grid;
  j["grid_scores"] = info.grid_scores;
  j["chosen"] = info.chosen;
  return j;
}

TrainingInfo info_from_json(const nlohmann::json& j) {
  TrainingInfo info;
  info.source_dim = j.at("source_dim").get<int>();
  info.target_dim = j.at("target_dim").get<int>();
  info.pair_count = j.at("pair_count").get<std::size_t>();
  info.grid = j.at("grid").get<std::vector<double>>();
  info.grid_scores = j.at("grid_scores").get<std::vector<double>>();
  info.chosen = j.at("chosen").get<double>();
  return info;
}

}  // namespace

PairedDataset::PairedDataset(std::vector<Eigen::VectorXd> sources,
                             std::vector<std::string> target_labels,
                             const EmbeddingSpace& target_space)
    : sources_(std::move(sources)),
      target_labels_(std::move(target_labels)),
      target_space_(&target_space) {
  if (sources_.size() != target_labels_.size())
    throw ContractError("paired dataset: source/label count mismatch");
  if (sources_.empty()) throw ContractError("paired dataset: no pairs");
  source_dim_ = static_cast<int>(sources_.front().size());
  if (source_dim_ == 0) throw ContractError("paired dataset: zero-dimensional source");
  for (const auto& v : sources_)
    if (static_cast<int>(v.size()) != source_dim_)
      throw ContractError("paired dataset: inconsistent source dimensions");
  for (const auto& label : target_labels_)
    if (!target_space_->contains(label))
      throw ContractError("paired dataset: label not in target space: " + label);
}

Eigen::MatrixXd PairedDataset::source_matrix() const { return stack_columns(sources_, source_dim_); }

Eigen::MatrixXd PairedDataset::target_matrix() const {
  Eigen::MatrixXd m(target_space_->dim(), static_cast<Eigen::Index>(target_labels_.size()));
  for (std::size_t i = 0; i < target_labels_.size(); ++i)
    m.col(static_cast<Eigen::Index>(i)) = target_space_->vector(target_labels_[i]);
  return m;
}

PairedDataset PairedDataset::subset(const std::vector<std::size_t>& indices) const {
  std::vector<Eigen::VectorXd> sources;
  std::vector<std::string> labels;
  sources.reserve(indices.size());
  labels.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= size()) throw ContractError("paired dataset subset: index out of range");
    sources.push_back(sources_[idx]);
    labels.push_back(target_labels_[idx]);
  }
  return PairedDataset(std::move(sources), std::move(labels), *target_space_);
}

ProjectionModel ProjectionModel::make_ridge(RidgeModel model, TrainingInfo info) {
  ProjectionModel p;
  p.ridge_ = std::move(model);
  p.info_ = std::move(info);
  return p;
}

ProjectionModel ProjectionModel::make_ncca(NccaModel model, TrainingInfo info) {
  ProjectionModel p;
  p.ncca_ = std::move(model);
  p.info_ = std::move(info);
  return p;
}

const RidgeModel& ProjectionModel::ridge() const {
  if (!ridge_) throw StateError("projection model is not ridge");
  return *ridge_;
}

const NccaModel& ProjectionModel::ncca() const {
  if (!ncca_) throw StateError("projection model is not ncca");
  return *ncca_;
}

int ProjectionModel::source_dim() const {
  return is_ridge() ? static_cast<int>(ridge_->coeffs.cols())
                    : static_cast<int>(ncca_->source_proj.rows());
}

int ProjectionModel::output_dim() const {
  return is_ridge() ? static_cast<int>(ridge_->coeffs.rows())
                    : static_cast<int>(ncca_->source_proj.cols());
}

nlohmann::json ProjectionModel::to_json() const {
  nlohmann::json j;
  j["format"] = "visphrase-projection";
  j["version"] = kLibraryVersion;
  j["info"] = info_to_json(info_);
  if (is_ridge()) {
    j["kind"] = "ridge";
    j["coeffs"] = matrix_to_json(ridge_->coeffs);
    j["lambda"] = ridge_->lambda;
    j["pseudoinverse_fallback"] = ridge_->pseudoinverse_fallback;
  } else {
    j["kind"] = "ncca";
    j["target_proj"] = matrix_to_json(ncca_->target_proj);
    j["source_proj"] = matrix_to_json(ncca_->source_proj);
    j["correlations"] = vector_to_json(ncca_->correlations);
    j["power"] = ncca_->power;
    j["target_mean"] = vector_to_json(ncca_->target_mean);
    j["source_mean"] = vector_to_json(ncca_->source_mean);
  }
  return j;
}

ProjectionModel ProjectionModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "visphrase-projection")
      throw FormatError("not a projection model payload");
    TrainingInfo info = info_from_json(j.at("info"));
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "ridge") {
      RidgeModel m;
      m.coeffs = matrix_from_json(j.at("coeffs"));
      m.lambda = j.at("lambda").get<double>();
      m.pseudoinverse_fallback = j.at("pseudoinverse_fallback").get<bool>();
      return make_ridge(std::move(m), std::move(info));
    }
    if (kind == "ncca") {
      NccaModel m;
      m.target_proj = matrix_from_json(j.at("target_proj"));
      m.source_proj = matrix_from_json(j.at("source_proj"));
      m.correlations = vector_from_json(j.at("correlations"));
      m.power = j.at("power").get<double>();
      m.target_mean = vector_from_json(j.at("target_mean"));
      m.source_mean = vector_from_json(j.at("source_mean"));
      return make_ncca(std::move(m), std::move(info));
    }
    throw FormatError("unknown projection model kind: " + kind);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("projection model payload: ") + e.what());
  }
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  grid.reserve(9);
  for (int i = 0; i < 9; ++i) grid.push_back(std::pow(10.0, -3.0 + 0.75 * i));
  return grid;
}

std::vector<double> default_power_grid() { return {0.0, 0.25, 0.5, 1.0, 2.0}; }

namespace {

RidgeModel solve_ridge(const Eigen::MatrixXd& targets, const linalg::ThinSvd& source_svd,
                       Eigen::Index source_rows, double lambda) {
  auto sol = linalg::ridge_solve(targets, source_svd, lambda, source_rows);
  RidgeModel m;
  m.coeffs = std::move(sol.coeffs);
  m.lambda = lambda;
  m.pseudoinverse_fallback = sol.pseudoinverse_fallback;
  return m;
}

}  // namespace

double tune_lambda(const PairedDataset& data, const std::vector<double>& grid, int folds,
                   std::uint64_t seed) {
  if (grid.empty()) throw ContractError("lambda grid is empty");
  for (double lambda : grid)
    if (lambda < 0.0 || !std::isfinite(lambda)) throw ContractError("lambda must be finite and >= 0");
  if (folds < 2) throw ContractError("cross-validation needs at least 2 folds");
  const std::size_t n = data.size();
  if (n < static_cast<std::size_t>(folds))
    throw ContractError("fewer pairs than cross-validation folds");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<double> total_sse(grid.size(), 0.0);
  std::size_t total_held = 0;
  for (int fold = 0; fold < folds; ++fold) {
    // Contiguous slices of the shuffled order; sizes differ by at most one.
    const std::size_t begin = n * static_cast<std::size_t>(fold) / static_cast<std::size_t>(folds);
    const std::size_t end =
        n * static_cast<std::size_t>(fold + 1) / static_cast<std::size_t>(folds);
    std::vector<std::size_t> train_idx, held_idx;
    for (std::size_t i = 0; i < n; ++i)
      (i >= begin && i < end ? held_idx : train_idx).push_back(order[i]);
    if (train_idx.empty() || held_idx.empty()) continue;

    const PairedDataset train = data.subset(train_idx);
    const Eigen::MatrixXd sources = train.source_matrix();
    const Eigen::MatrixXd targets = train.target_matrix();
    const auto svd = linalg::thin_svd(sources);

    const PairedDataset held = data.subset(held_idx);
    const Eigen::MatrixXd held_sources = held.source_matrix();
    const Eigen::MatrixXd held_targets = held.target_matrix();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const RidgeModel m = solve_ridge(targets, svd, sources.rows(), grid[g]);
      total_sse[g] += (m.coeffs * held_sources - held_targets).squaredNorm();
    }
    total_held += held_idx.size();
  }

  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    // Strict improvement keeps the earliest (smallest) lambda on ties.
    if (total_sse[g] < total_sse[best]) best = g;
  }
  (void)total_held;
  return grid[best];
}

ProjectionModel train_ridge(const PairedDataset& data, std::optional<double> lambda,
                            const CvOptions& cv) {
  TrainingInfo info;
  info.source_dim = data.source_dim();
  info.target_dim = data.target_dim();
  info.pair_count = data.size();

  double chosen;
  if (lambda) {
    if (*lambda < 0.0 || !std::isfinite(*lambda))
      throw ContractError("lambda must be finite and >= 0");
    chosen = *lambda;
  } else {
    const std::vector<double> grid = cv.grid.empty() ? default_lambda_grid() : cv.grid;
    chosen = tune_lambda(data, grid, cv.folds, cv.seed);
    info.grid = grid;
    // Record mean held-out SSE per value for inspection.
    // tune_lambda already did the work; recompute scores cheaply here
    // would repeat folds, so store only the grid and the winner.
  }
  info.chosen = chosen;

  const Eigen::MatrixXd sources = data.source_matrix();
  const Eigen::MatrixXd targets = data.target_matrix();
  const auto svd = linalg::thin_svd(sources);
  RidgeModel model = solve_ridge(targets, svd, sources.rows(), chosen);
  return ProjectionModel::make_ridge(std::move(model), std::move(info));
}

namespace {

struct CenteredPair {
  Eigen::MatrixXd x;  // target side, centered, d2 x n
  Eigen::MatrixXd y;  // source side, centered, d1 x n
  Eigen::VectorXd mean_x;
  Eigen::VectorXd mean_y;
};

CenteredPair center_pair(const PairedDataset& data) {
  CenteredPair c;
  c.x = data.target_matrix();
  c.y = data.source_matrix();
  c.mean_x = c.x.rowwise().mean();
  c.mean_y = c.y.rowwise().mean();
  c.x.colwise() -= c.mean_x;
  c.y.colwise() -= c.mean_y;
  return c;
}

Eigen::MatrixXd regularized_covariance(const Eigen::MatrixXd& centered, double n,
                                       double epsilon_scale) {
  Eigen::MatrixXd c = (centered * centered.transpose()) / n;
  const double eps = epsilon_scale * c.trace() / static_cast<double>(c.rows());
  c.diagonal().array() += eps;
  return c;
}

NccaModel fit_ncca(const PairedDataset& data, double power, double epsilon_scale) {
  const CenteredPair c = center_pair(data);
  const double n = static_cast<double>(data.size());
  const Eigen::MatrixXd cxx = regularized_covariance(c.x, n, epsilon_scale);
  const Eigen::MatrixXd cyy = regularized_covariance(c.y, n, epsilon_scale);
  const Eigen::MatrixXd cxy = (c.x * c.y.transpose()) / n;

  const Eigen::MatrixXd wx = linalg::inverse_sqrt_spd(cxx);
  const Eigen::MatrixXd wy = linalg::inverse_sqrt_spd(cyy);
  const auto svd = linalg::thin_svd(wx * cxy * wy);

  // Keep all components; correlations are clamped to [0, 1] to absorb
  // the regularization jitter before exponentiation.
  Eigen::VectorXd rho = svd.sigma.cwiseMin(1.0).cwiseMax(0.0);
  Eigen::VectorXd scale(rho.size());
  for (Eigen::Index i = 0; i < rho.size(); ++i)
    scale(i) = (rho(i) == 0.0 && power == 0.0) ? 1.0 : std::pow(rho(i), power);

  NccaModel m;
  m.target_proj = wx * svd.u * scale.asDiagonal();
  m.source_proj = wy * svd.v * scale.asDiagonal();
  m.correlations = std::move(rho);
  m.power = power;
  m.target_mean = c.mean_x;
  m.source_mean = c.mean_y;
  return m;
}

// Fraction of held-out pairs whose projected source is nearest (by cosine)
// to its own target among all held-out targets.
double holdout_top1(const NccaModel& m, const PairedDataset& held) {
  const std::size_t n = held.size();
  Eigen::MatrixXd targets(m.target_proj.cols(), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd w = held.target_space().vector(held.target_labels()[i]);
    targets.col(static_cast<Eigen::Index>(i)) = m.target_proj.transpose() * (w - m.target_mean);
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd p =
        m.source_proj.transpose() * (held.sources()[i] - m.source_mean);
    const double pn = p.norm();
    if (pn == 0.0) continue;
    double best = -2.0;
    std::size_t best_idx = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const Eigen::VectorXd t = targets.col(static_cast<Eigen::Index>(k));
      const double tn = t.norm();
      const double cos = tn == 0.0 ? -1.0 : p.dot(t) / (pn * tn);
      if (cos > best) {
        best = cos;
        best_idx = k;
      }
    }
    if (held.target_labels()[best_idx] == held.target_labels()[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

ProjectionModel train_ncca(const PairedDataset& data, std::optional<double> power,
                           const NccaOptions& options) {
  TrainingInfo info;
  info.source_dim = data.source_dim();
  info.target_dim = data.target_dim();
  info.pair_count = data.size();

  double chosen;
  if (power) {
    if (!std::isfinite(*power) || *power < 0.0)
      throw ContractError("correlation power must be finite and >= 0");
    chosen = *power;
  } else {
    const std::vector<double> grid =
        options.power_grid.empty() ? default_power_grid() : options.power_grid;
    if (options.holdout_fraction <= 0.0 || options.holdout_fraction >= 1.0)
      throw ContractError("holdout fraction must be in (0, 1)");
    const std::size_t n = data.size();
    std::size_t held_n = static_cast<std::size_t>(
        std::floor(options.holdout_fraction * static_cast<double>(n)));
    held_n = std::max<std::size_t>(held_n, 1);
    if (held_n >= n) throw ContractError("holdout leaves no training pairs");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(options.seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::vector<std::size_t> held_idx(order.begin(),
                                            order.begin() + static_cast<std::ptrdiff_t>(held_n));
    const std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(held_n),
                                             order.end());
    const PairedDataset train = data.subset(train_idx);
    const PairedDataset held = data.subset(held_idx);

    info.grid = grid;
    info.grid_scores.reserve(grid.size());
    std::size_t best = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      if (!std::isfinite(grid[g]) || grid[g] < 0.0)
        throw ContractError("correlation power must be finite and >= 0");
      const NccaModel m = fit_ncca(train, grid[g], options.covariance_epsilon_scale);
      info.grid_scores.push_back(holdout_top1(m, held));
      if (info.grid_scores[g] > info.grid_scores[best]) best = g;
    }
    chosen = grid[best];
  }
  info.chosen = chosen;

  NccaModel model = fit_ncca(data, chosen, options.covariance_epsilon_scale);
  return ProjectionModel::make_ncca(std::move(model), std::move(info));
}

Eigen::VectorXd project(const ProjectionModel& model, const Eigen::VectorXd& v) {
  if (static_cast<int>(v.size()) != model.source_dim())
    throw ContractError("project: source dimension mismatch");
  if (model.is_ridge()) return model.ridge().coeffs * v;
  const NccaModel& m = model.ncca();
  return m.source_proj.transpose() * (v - m.source_mean);
}

Eigen::VectorXd embed_target(const ProjectionModel& model, const Eigen::VectorXd& w) {
  if (model.is_ridge()) {
    if (w.size() != model.ridge().coeffs.rows())
      throw ContractError("embed_target: target dimension mismatch");
    return w;
  }
  const NccaModel& m = model.ncca();
  if (w.size() != m.target_proj.rows())
    throw ContractError("embed_target: target dimension mismatch");
  return m.target_proj.transpose() * (w - m.target_mean);
}

EmbeddingSpace retrieval_space(const ProjectionModel& model, const EmbeddingSpace& target) {
  if (model.is_ridge()) return target;
  const NccaModel& m = model.ncca();
  if (target.dim() != static_cast<int>(m.target_proj.rows()))
    throw ContractError("retrieval_space: target dimension mismatch");
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(target.size()), m.target_proj.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    rows.row(i) =
        (m.target_proj.transpose() * (target.matrix().row(i).transpose() - m.target_mean))
            .transpose();
  EmbeddingSpace out(target.labels(), std::move(rows));
  if (target.has_pos_tags()) {
    std::unordered_map<std::string, Pos> tags;
    for (const auto& label : target.labels()) tags[label] = *target.pos(label);
    out.set_pos_tags(tags);
  }
  if (target.has_frequency_ranks()) {
    std::unordered_map<std::string, int> ranks;
    for (const auto& label : target.labels())
      if (auto r = target.frequency_rank(label)) ranks[label] = *r;
    out.set_frequency_ranks(ranks);
  }
  return out;
}

void save_projection_model(const ProjectionModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << model.to_json().dump(2) << '\n';
}

ProjectionModel load_projection_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("projection model parse: ") + e.what());
  }
  return ProjectionModel::from_json(j);
}

}  // namespace visphrase
