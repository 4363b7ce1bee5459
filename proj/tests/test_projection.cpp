#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "support/oracles.hpp"
#include "visphrase/embedding.hpp"
#include "visphrase/error.hpp"
#include "visphrase/projection.hpp"

using namespace visphrase;

namespace {

EmbeddingSpace word_space(int n, int dim, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::string> labels;
  Eigen::MatrixXd rows(n, dim);
  for (int i = 0; i < n; ++i) {
    labels.push_back("w" + std::to_string(i));
    for (int j = 0; j < dim; ++j) rows(i, j) = gauss(rng);
  }
  return EmbeddingSpace(std::move(labels), std::move(rows));
}

// Pairs generated as v = G * w + noise, one or more images per word.
struct PlantedData {
  Eigen::MatrixXd inverse_map;  // G: d1 x d2
  std::vector<Eigen::VectorXd> sources;
  std::vector<std::string> labels;
};

PlantedData plant_linear(const EmbeddingSpace& space, int d1, int per_word, double noise,
                         unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  PlantedData data;
  data.inverse_map.resize(d1, space.dim());
  for (int i = 0; i < d1; ++i)
    for (int j = 0; j < space.dim(); ++j) data.inverse_map(i, j) = gauss(rng);
  for (const auto& label : space.labels()) {
    for (int r = 0; r < per_word; ++r) {
      Eigen::VectorXd v = data.inverse_map * space.vector(label);
      for (int i = 0; i < d1; ++i) v(i) += noise * gauss(rng);
      data.sources.push_back(std::move(v));
      data.labels.push_back(label);
    }
  }
  return data;
}

}  // namespace

TEST_CASE("paired dataset validates its inputs") {
  const auto space = word_space(3, 4, 1);
  std::vector<Eigen::VectorXd> sources{Eigen::VectorXd::Ones(2)};
  CHECK_THROWS_AS(PairedDataset(sources, {"nope"}, space), ContractError);
  CHECK_THROWS_AS(PairedDataset({}, {}, space), ContractError);
  std::vector<Eigen::VectorXd> uneven{Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(3)};
  CHECK_THROWS_AS(PairedDataset(uneven, {"w0", "w1"}, space), ContractError);
}

TEST_CASE("ridge recovers a planted map from noiseless full-rank data") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int d1 = 5, d2 = 6, n = 40;
  Eigen::MatrixXd f_star(d2, d1);
  for (int i = 0; i < d2; ++i)
    for (int j = 0; j < d1; ++j) f_star(i, j) = gauss(rng);
  Eigen::MatrixXd sources_m(d1, n);
  for (int i = 0; i < d1; ++i)
    for (int j = 0; j < n; ++j) sources_m(i, j) = gauss(rng);
  Eigen::MatrixXd targets_m = f_star * sources_m;
  // Register targets as a word space so PairedDataset can reference them.
  std::vector<std::string> labels;
  Eigen::MatrixXd rows(n, d2);
  std::vector<Eigen::VectorXd> sources;
  for (int j = 0; j < n; ++j) {
    labels.push_back("w" + std::to_string(j));
    rows.row(j) = targets_m.col(j).transpose();
    sources.push_back(sources_m.col(j));
  }
  EmbeddingSpace space(labels, rows);
  PairedDataset data(sources, labels, space);
  const auto model = train_ridge(data, 0.0);
  CHECK_FALSE(model.ridge().pseudoinverse_fallback);
  CHECK((model.ridge().coeffs - f_star).norm() / f_star.norm() < 1e-8);
}

TEST_CASE("noisy ridge stays within 5% of the planted map and matches the descent oracle") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int d = 10, n = 200;
  Eigen::MatrixXd f_star(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) f_star(i, j) = gauss(rng);
  Eigen::MatrixXd sources_m(d, n);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < n; ++j) sources_m(i, j) = gauss(rng);
  Eigen::MatrixXd targets_m = f_star * sources_m;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < n; ++j) targets_m(i, j) += 0.01 * gauss(rng);

  std::vector<std::string> labels;
  Eigen::MatrixXd rows(n, d);
  std::vector<Eigen::VectorXd> sources;
  for (int j = 0; j < n; ++j) {
    labels.push_back("w" + std::to_string(j));
    rows.row(j) = targets_m.col(j).transpose();
    sources.push_back(sources_m.col(j));
  }
  EmbeddingSpace space(labels, rows);
  PairedDataset data(sources, labels, space);

  const double lambda = 0.1;
  const auto model = train_ridge(data, lambda);
  CHECK((model.ridge().coeffs - f_star).norm() / f_star.norm() < 0.05);

  const Eigen::MatrixXd oracle_fit =
      oracle::ridge_gradient_descent(targets_m, sources_m, lambda);
  CHECK((model.ridge().coeffs - oracle_fit).norm() / oracle_fit.norm() < 1e-6);
  const Eigen::MatrixXd normal_fit = oracle::ridge_normal_equations(targets_m, sources_m, lambda);
  CHECK((model.ridge().coeffs - normal_fit).norm() / normal_fit.norm() < 1e-10);
}

TEST_CASE("huge lambda drives the coefficients to zero") {
  const auto space = word_space(10, 4, 31);
  const auto planted = plant_linear(space, 4, 1, 0.0, 7);
  PairedDataset data(planted.sources, planted.labels, space);
  const auto model = train_ridge(data, 1e12);
  CHECK(model.ridge().coeffs.norm() < 1e-6);
}

TEST_CASE("training error grows and coefficient norm shrinks with lambda") {
  const auto space = word_space(20, 5, 37);
  const auto planted = plant_linear(space, 5, 1, 0.05, 11);
  PairedDataset data(planted.sources, planted.labels, space);
  const Eigen::MatrixXd sources = data.source_matrix();
  const Eigen::MatrixXd targets = data.target_matrix();
  double prev_err = -1.0, prev_norm = std::numeric_limits<double>::infinity();
  for (double lambda : default_lambda_grid()) {
    const auto model = train_ridge(data, lambda);
    const double err = (model.ridge().coeffs * sources - targets).squaredNorm();
    const double norm = model.ridge().coeffs.norm();
    CHECK(err >= prev_err - 1e-9);
    CHECK(norm <= prev_norm + 1e-9);
    prev_err = err;
    prev_norm = norm;
  }
}

TEST_CASE("rank-deficient lambda 0 falls back to the pseudoinverse") {
  const auto space = word_space(4, 3, 41);
  // Two distinct pairs in a 3-dim source space: rank 2 < 3.
  std::vector<Eigen::VectorXd> sources{Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0)};
  PairedDataset data(sources, {"w0", "w1"}, space);
  const auto model = train_ridge(data, 0.0);
  CHECK(model.ridge().pseudoinverse_fallback);
  // Pseudoinverse still fits the training pairs exactly.
  for (std::size_t i = 0; i < sources.size(); ++i)
    CHECK((model.ridge().coeffs * sources[i] - space.vector(data.target_labels()[i])).norm() <
          1e-9);
}

TEST_CASE("tune_lambda picks the smallest grid value on noiseless data") {
  const auto space = word_space(24, 4, 43);
  const auto planted = plant_linear(space, 4, 1, 0.0, 13);
  PairedDataset data(planted.sources, planted.labels, space);
  const double chosen = tune_lambda(data, default_lambda_grid(), 4, 0);
  CHECK(chosen == doctest::Approx(default_lambda_grid().front()));
}

TEST_CASE("tune_lambda single-element grid returns that element") {
  const auto space = word_space(8, 3, 47);
  const auto planted = plant_linear(space, 3, 1, 0.0, 17);
  PairedDataset data(planted.sources, planted.labels, space);
  CHECK(tune_lambda(data, {2.5}, 2, 0) == 2.5);
}

TEST_CASE("tune_lambda rejects fewer pairs than folds") {
  const auto space = word_space(3, 3, 53);
  const auto planted = plant_linear(space, 3, 1, 0.0, 19);
  PairedDataset data(planted.sources, planted.labels, space);
  CHECK_THROWS_AS(tune_lambda(data, {1.0}, 5, 0), ContractError);
}

TEST_CASE("tune_lambda prefers regularization under heavy noise and matches an independent CV loop") {
  const auto space = word_space(30, 20, 59);
  const auto planted = plant_linear(space, 20, 1, 1.0, 23);
  PairedDataset data(planted.sources, planted.labels, space);
  const auto grid = default_lambda_grid();
  const int folds = 5;
  const std::uint64_t seed = 0;
  const double chosen = tune_lambda(data, grid, folds, seed);
  CHECK(chosen > 0.0);

  // Independent CV loop: same fold protocol, ridge solved by explicit
  // normal equations instead of the library path.
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> sse(grid.size(), 0.0);
  for (int fold = 0; fold < folds; ++fold) {
    const std::size_t begin = n * static_cast<std::size_t>(fold) / folds;
    const std::size_t end = n * static_cast<std::size_t>(fold + 1) / folds;
    std::vector<std::size_t> train_idx, held_idx;
    for (std::size_t i = 0; i < n; ++i)
      (i >= begin && i < end ? held_idx : train_idx).push_back(order[i]);
    const auto train = data.subset(train_idx);
    const auto held = data.subset(held_idx);
    const Eigen::MatrixXd ts = train.source_matrix();
    const Eigen::MatrixXd tt = train.target_matrix();
    const Eigen::MatrixXd hs = held.source_matrix();
    const Eigen::MatrixXd ht = held.target_matrix();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const Eigen::MatrixXd f = oracle::ridge_normal_equations(tt, ts, grid[g]);
      sse[g] += (f * hs - ht).squaredNorm();
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (sse[g] < sse[best]) best = g;
  CHECK(chosen == doctest::Approx(grid[best]));
}

TEST_CASE("ridge projection is linear and maps zero to zero") {
  const auto space = word_space(12, 5, 61);
  const auto planted = plant_linear(space, 5, 1, 0.0, 29);
  PairedDataset data(planted.sources, planted.labels, space);
  const auto model = train_ridge(data, 0.01);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd u(5), v(5);
  for (int i = 0; i < 5; ++i) {
    u(i) = gauss(rng);
    v(i) = gauss(rng);
  }
  const Eigen::VectorXd lhs = project(model, 2.0 * u - 3.0 * v);
  const Eigen::VectorXd rhs = 2.0 * project(model, u) - 3.0 * project(model, v);
  CHECK((lhs - rhs).norm() < 1e-9);
  CHECK(project(model, Eigen::VectorXd::Zero(5)).norm() == 0.0);
  CHECK_THROWS_AS(project(model, Eigen::VectorXd::Zero(4)), ContractError);
}

TEST_CASE("identity ridge model projects vectors unchanged") {
  RidgeModel m;
  m.coeffs = Eigen::MatrixXd::Identity(4, 4);
  const auto model = ProjectionModel::make_ridge(std::move(m), {});
  Eigen::VectorXd v(4);
  v << 1, -2, 3, 0.5;
  CHECK((project(model, v) - v).norm() == 0.0);
}

TEST_CASE("noiseless planted retrieval reaches 100% top-1 through nearest") {
  const auto space = word_space(50, 8, 67);
  const auto planted = plant_linear(space, 10, 1, 0.0, 37);
  PairedDataset data(planted.sources, planted.labels, space);
  const auto model = train_ridge(data, 0.0);
  const auto retrieval = retrieval_space(model, space);
  for (std::size_t i = 0; i < planted.sources.size(); ++i) {
    const auto r = nearest(retrieval, project(model, planted.sources[i]), 1);
    CHECK(r.items[0].label == planted.labels[i]);
  }
}

TEST_CASE("ncca with power 0 matches the plain CCA oracle") {
  std::mt19937_64 rng(71);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int d1 = 4, d2 = 3, n = 300;
  // Correlated pair: y shares structure with x through a random map.
  Eigen::MatrixXd mix(d1, d2);
  for (int i = 0; i < d1; ++i)
    for (int j = 0; j < d2; ++j) mix(i, j) = gauss(rng);
  Eigen::MatrixXd x(d2, n), y(d1, n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd base(d2);
    for (int i = 0; i < d2; ++i) base(i) = gauss(rng);
    x.col(j) = base;
    y.col(j) = mix * base;
    for (int i = 0; i < d1; ++i) y.col(j)(i) += 0.5 * gauss(rng);
  }
  std::vector<std::string> labels;
  Eigen::MatrixXd rows(n, d2);
  std::vector<Eigen::VectorXd> sources;
  for (int j = 0; j < n; ++j) {
    labels.push_back("w" + std::to_string(j));
    rows.row(j) = x.col(j).transpose();
    sources.push_back(y.col(j));
  }
  EmbeddingSpace space(labels, rows);
  PairedDataset data(sources, labels, space);
  NccaOptions options;
  options.covariance_epsilon_scale = 0.0;  // exact CCA comparison
  const auto model = train_ncca(data, 0.0, options);

  const Eigen::MatrixXd xc = x.colwise() - Eigen::VectorXd(x.rowwise().mean());
  const Eigen::MatrixXd yc = y.colwise() - Eigen::VectorXd(y.rowwise().mean());
  const Eigen::VectorXd rho_oracle = oracle::cca_correlations(xc, yc);
  REQUIRE(model.ncca().correlations.size() >= rho_oracle.size());
  for (Eigen::Index i = 0; i < rho_oracle.size(); ++i)
    CHECK(model.ncca().correlations(i) == doctest::Approx(rho_oracle(i)).epsilon(1e-8));

  // Projected coordinates correlate perfectly component-by-component
  // with the canonical variates implied by the oracle correlations:
  // corr(a_i^T x, b_i^T y) must equal rho_i.
  for (Eigen::Index i = 0; i < model.ncca().correlations.size(); ++i) {
    Eigen::VectorXd px(n), py(n);
    for (int j = 0; j < n; ++j) {
      px(j) = model.ncca().target_proj.col(i).dot(xc.col(j));
      py(j) = model.ncca().source_proj.col(i).dot(yc.col(j));
    }
    const double corr = px.dot(py) / (px.norm() * py.norm());
    CHECK(corr == doctest::Approx(model.ncca().correlations(i)).epsilon(1e-6));
  }
}

TEST_CASE("identical paired spaces give unit canonical correlations") {
  std::mt19937_64 rng(79);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int d = 5, n = 80;
  Eigen::MatrixXd x(d, n);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < n; ++j) x(i, j) = gauss(rng);
  std::vector<std::string> labels;
  Eigen::MatrixXd rows(n, d);
  std::vector<Eigen::VectorXd> sources;
  for (int j = 0; j < n; ++j) {
    labels.push_back("w" + std::to_string(j));
    rows.row(j) = x.col(j).transpose();
    sources.push_back(x.col(j));
  }
  EmbeddingSpace space(labels, rows);
  PairedDataset data(sources, labels, space);
  const auto model = train_ncca(data, 1.0);
  for (Eigen::Index i = 0; i < model.ncca().correlations.size(); ++i)
    CHECK(model.ncca().correlations(i) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("one correlated and one independent direction") {
  std::mt19937_64 rng(83);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = 500;
  Eigen::MatrixXd x(2, n), y(2, n);
  for (int j = 0; j < n; ++j) {
    const double shared = gauss(rng);
    x(0, j) = shared;
    x(1, j) = gauss(rng);
    y(0, j) = shared;
    y(1, j) = gauss(rng);
  }
  std::vector<std::string> labels;
  Eigen::MatrixXd rows(n, 2);
  std::vector<Eigen::VectorXd> sources;
  for (int j = 0; j < n; ++j) {
    labels.push_back("w" + std::to_string(j));
    rows.row(j) = x.col(j).transpose();
    sources.push_back(y.col(j));
  }
  EmbeddingSpace space(labels, rows);
  PairedDataset data(sources, labels, space);
  const auto model = train_ncca(data, 1.0);
  REQUIRE(model.ncca().correlations.size() == 2);
  CHECK(std::abs(model.ncca().correlations(0) - 1.0) < 5e-2);
  CHECK(std::abs(model.ncca().correlations(1)) < 5e-2);
}

TEST_CASE("ncca correlations are invariant to affine reparameterization of the source") {
  std::mt19937_64 rng(89);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int d = 4, n = 120;
  Eigen::MatrixXd x(d, n), y(d, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < d; ++i) {
      x(i, j) = gauss(rng);
      y(i, j) = 0.5 * x(i, j) + 0.9 * gauss(rng);
    }
  Eigen::MatrixXd t(d, d);
  do {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) t(i, j) = gauss(rng);
  } while (std::abs(t.determinant()) < 0.1);
  Eigen::VectorXd shift(d);
  for (int i = 0; i < d; ++i) shift(i) = gauss(rng);

  const auto build = [&](const Eigen::MatrixXd& ys) {
    std::vector<std::string> labels;
    Eigen::MatrixXd rows(n, d);
    std::vector<Eigen::VectorXd> sources;
    for (int j = 0; j < n; ++j) {
      labels.push_back("w" + std::to_string(j));
      rows.row(j) = x.col(j).transpose();
      sources.push_back(ys.col(j));
    }
    return std::make_pair(labels, std::make_pair(rows, sources));
  };

  NccaOptions options;
  options.covariance_epsilon_scale = 0.0;
  auto [labels_a, ra] = build(y);
  EmbeddingSpace space_a(labels_a, ra.first);
  PairedDataset data_a(ra.second, labels_a, space_a);
  const auto model_a = train_ncca(data_a, 1.0, options);

  Eigen::MatrixXd y2 = t * y;
  y2.colwise() += shift;
  auto [labels_b, rb] = build(y2);
  EmbeddingSpace space_b(labels_b, rb.first);
  PairedDataset data_b(rb.second, labels_b, space_b);
  const auto model_b = train_ncca(data_b, 1.0, options);

  REQUIRE(model_a.ncca().correlations.size() == model_b.ncca().correlations.size());
  for (Eigen::Index i = 0; i < model_a.ncca().correlations.size(); ++i)
    CHECK(model_a.ncca().correlations(i) ==
          doctest::Approx(model_b.ncca().correlations(i)).epsilon(1e-6));
}

TEST_CASE("ncca embed_target and project land in the same shared space") {
  const auto space = word_space(40, 6, 97);
  const auto planted = plant_linear(space, 6, 1, 0.1, 41);
  PairedDataset data(planted.sources, planted.labels, space);
  const auto model = train_ncca(data, 1.0);
  const auto retrieval = retrieval_space(model, space);
  CHECK(retrieval.dim() == model.output_dim());
  // Strong planted correlation: most words retrieve themselves top-3.
  int hits = 0;
  for (std::size_t i = 0; i < planted.sources.size(); ++i) {
    const auto r = nearest(retrieval, project(model, planted.sources[i]), 3);
    for (const auto& item : r.items)
      if (item.label == planted.labels[i]) {
        ++hits;
        break;
      }
  }
  CHECK(hits >= 36);
}

TEST_CASE("auto power tuning picks from the grid and records scores") {
  const auto space = word_space(30, 4, 101);
  const auto planted = plant_linear(space, 5, 2, 0.2, 43);
  PairedDataset data(planted.sources, planted.labels, space);
  const auto model = train_ncca(data, std::nullopt);
  const auto& info = model.info();
  REQUIRE(info.grid == default_power_grid());
  REQUIRE(info.grid_scores.size() == info.grid.size());
  CHECK(std::find(info.grid.begin(), info.grid.end(), info.chosen) != info.grid.end());
  CHECK(model.ncca().power == info.chosen);
}

TEST_CASE("auto lambda cross-validation records the grid") {
  const auto space = word_space(20, 4, 103);
  const auto planted = plant_linear(space, 4, 1, 0.3, 47);
  PairedDataset data(planted.sources, planted.labels, space);
  const auto model = train_ridge(data, std::nullopt);
  CHECK(model.info().grid == default_lambda_grid());
  CHECK(model.ridge().lambda == model.info().chosen);
}

TEST_CASE("projection model serialization round trips") {
  const auto space = word_space(16, 4, 107);
  const auto planted = plant_linear(space, 5, 1, 0.05, 53);
  PairedDataset data(planted.sources, planted.labels, space);

  const auto ridge = train_ridge(data, 0.5);
  const auto ridge_again = ProjectionModel::from_json(ridge.to_json());
  CHECK((ridge_again.ridge().coeffs - ridge.ridge().coeffs).norm() == 0.0);
  CHECK(ridge_again.ridge().lambda == 0.5);

  const auto ncca = train_ncca(data, 0.5);
  const auto path = std::filesystem::temp_directory_path() / "vp_model.json";
  save_projection_model(ncca, path);
  const auto ncca_again = load_projection_model(path);
  Eigen::VectorXd probe(5);
  probe << 1, -1, 2, 0.5, -0.25;
  CHECK((project(ncca_again, probe) - project(ncca, probe)).norm() == 0.0);
  CHECK(ncca_again.ncca().power == 0.5);
  CHECK(ncca_again.info().pair_count == data.size());
}

TEST_CASE("default grids match their documented shapes") {
  const auto lambdas = default_lambda_grid();
  REQUIRE(lambdas.size() == 9);
  CHECK(lambdas.front() == doctest::Approx(1e-3));
  CHECK(lambdas.back() == doctest::Approx(1e3));
  for (std::size_t i = 1; i < lambdas.size(); ++i)
    CHECK(lambdas[i] / lambdas[i - 1] == doctest::Approx(lambdas[1] / lambdas[0]).epsilon(1e-9));
  CHECK(default_power_grid() == std::vector<double>{0.0, 0.25, 0.5, 1.0, 2.0});
}
