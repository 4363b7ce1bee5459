#include "visphrase/attribute_repr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_map>

#include "parse.hpp"
#include "visphrase/error.hpp"
#include "visphrase/linalg.hpp"

namespace visphrase {

Eigen::VectorXd adjective_cosines(const EmbeddingSpace& adjectives, const Eigen::VectorXd& query) {
  if (static_cast<int>(query.size()) != adjectives.dim())
    throw ContractError("adjective_cosines: dimension mismatch");
  const double qn = query.norm();
  if (qn == 0.0) throw NumericError("adjective_cosines: zero-norm query");
  Eigen::VectorXd out(static_cast<Eigen::Index>(adjectives.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double rn = adjectives.matrix().row(i).norm();
    if (rn == 0.0)
      throw NumericError("adjective_cosines: zero-norm adjective: " +
                         adjectives.labels()[static_cast<std::size_t>(i)]);
    out(i) = adjectives.matrix().row(i).dot(query) / (rn * qn);
  }
  return out;
}

Eigen::VectorXd sparsify(const Eigen::VectorXd& values, double threshold) {
  Eigen::VectorXd out = values;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (out(i) < threshold) out(i) = 0.0;
  return out;
}

Eigen::VectorXd raw_attribute_cosines(const ProjectionModel& proj, const DecompositionModel& dec,
                                      const EmbeddingSpace& adjectives,
                                      const Eigen::VectorXd& image) {
  const Eigen::VectorXd projected = project(proj, image);
  if (projected.size() != dec.dim())
    throw ContractError("attribute vector: projection output does not match decomposition input");
  return adjective_cosines(adjectives, dec.decompose(projected).adjective);
}

AttributeVector attribute_vector_with_threshold(const ProjectionModel& proj,
                                                const DecompositionModel& dec,
                                                const EmbeddingSpace& adjectives,
                                                const Eigen::VectorXd& image, double threshold,
                                                std::string image_id) {
  AttributeVector av;
  av.image_id = std::move(image_id);
  av.sparsity_threshold = threshold;
  av.values = sparsify(raw_attribute_cosines(proj, dec, adjectives, image), threshold);
  return av;
}

AttributeVector attribute_vector(const ProjectionModel& proj, const DecompositionModel& dec,
                                 const EmbeddingSpace& adjectives, const Eigen::VectorXd& image,
                                 std::string image_id) {
  const Eigen::VectorXd cosines = raw_attribute_cosines(proj, dec, adjectives, image);
  const double threshold = cosines.mean();
  AttributeVector av;
  av.image_id = std::move(image_id);
  av.sparsity_threshold = threshold;
  av.values = sparsify(cosines, threshold);
  return av;
}

void FusionBasis::fit(const Eigen::MatrixXd& training, int target_dim) {
  const auto reduction = svd_reduce(training, target_dim);
  basis_ = reduction.basis;
}

Eigen::VectorXd FusionBasis::fold_in(const Eigen::VectorXd& concatenated) const {
  if (!fitted()) throw StateError("fusion basis is not fitted");
  if (concatenated.size() != basis_.rows())
    throw ContractError("fusion fold-in: dimension mismatch");
  return basis_.transpose() * concatenated;
}

nlohmann::json FusionBasis::to_json() const {
  nlohmann::json j;
  j["format"] = "visphrase-fusion-basis";
  j["version"] = kLibraryVersion;
  j["rows"] = basis_.rows();
  j["cols"] = basis_.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(basis_.size()));
  for (Eigen::Index r = 0; r < basis_.rows(); ++r)
    for (Eigen::Index c = 0; c < basis_.cols(); ++c) data.push_back(basis_(r, c));
  j["data"] = std::move(data);
  return j;
}

FusionBasis FusionBasis::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "visphrase-fusion-basis")
      throw FormatError("not a fusion basis payload");
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw FormatError("fusion basis payload shape mismatch");
    FusionBasis b;
    b.basis_.resize(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) b.basis_(r, c) = data[k++];
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("fusion basis payload: ") + e.what());
  }
}

Eigen::VectorXd fuse(const FusionBasis& basis, const Eigen::VectorXd& raw,
                     const AttributeVector& attr) {
  Eigen::VectorXd concatenated(raw.size() + attr.values.size());
  concatenated << raw, attr.values;
  return basis.fold_in(concatenated);
}

LinearClassifier::LinearClassifier(std::vector<std::string> classes, Eigen::MatrixXd weights,
                                   Eigen::VectorXd biases, OvaOptions options)
    : classes_(std::move(classes)),
      weights_(std::move(weights)),
      biases_(std::move(biases)),
      options_(options) {
  if (classes_.size() < 2) throw ContractError("classifier needs at least 2 classes");
  if (weights_.rows() != static_cast<Eigen::Index>(classes_.size()) ||
      biases_.size() != weights_.rows())
    throw ContractError("classifier shape mismatch");
  if (!weights_.allFinite() || !biases_.allFinite())
    throw NumericError("classifier weights are not finite");
  if (!std::is_sorted(classes_.begin(), classes_.end()))
    throw ContractError("classifier classes must be sorted");
}

Eigen::VectorXd LinearClassifier::scores(const Eigen::VectorXd& features) const {
  if (features.size() != weights_.cols())
    throw ContractError("classifier: feature dimension mismatch");
  return weights_ * features + biases_;
}

std::string LinearClassifier::predict(const Eigen::VectorXd& features) const {
  const Eigen::VectorXd s = scores(features);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < s.size(); ++i) {
    // Strict improvement keeps the lexicographically smallest class on
    // ties, since classes_ is sorted.
    if (s(i) > s(best)) best = i;
  }
  return classes_[static_cast<std::size_t>(best)];
}

nlohmann::json LinearClassifier::to_json() const {
  nlohmann::json j;
  j["format"] = "visphrase-classifier";
  j["version"] = kLibraryVersion;
  j["classes"] = classes_;
  j["rows"] = weights_.rows();
  j["cols"] = weights_.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(weights_.size()));
  for (Eigen::Index r = 0; r < weights_.rows(); ++r)
    for (Eigen::Index c = 0; c < weights_.cols(); ++c) data.push_back(weights_(r, c));
  j["weights"] = std::move(data);
  j["biases"] = std::vector<double>(biases_.data(), biases_.data() + biases_.size());
  j["regularization"] = options_.regularization;
  j["epochs"] = options_.epochs;
  j["eta0"] = options_.eta0;
  j["seed"] = options_.seed;
  return j;
}

LinearClassifier LinearClassifier::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "visphrase-classifier")
      throw FormatError("not a classifier payload");
    auto classes = j.at("classes").get<std::vector<std::string>>();
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("weights").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw FormatError("classifier payload shape mismatch");
    Eigen::MatrixXd weights(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) weights(r, c) = data[k++];
    const auto biases_vec = j.at("biases").get<std::vector<double>>();
    Eigen::VectorXd biases =
        Eigen::Map<const Eigen::VectorXd>(biases_vec.data(), static_cast<Eigen::Index>(biases_vec.size()));
    OvaOptions options;
    options.regularization = j.at("regularization").get<double>();
    options.epochs = j.at("epochs").get<int>();
    options.eta0 = j.at("eta0").get<double>();
    options.seed = j.at("seed").get<std::uint64_t>();
    return LinearClassifier(std::move(classes), std::move(weights), std::move(biases), options);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("classifier payload: ") + e.what());
  }
}

namespace {

// One binary hinge-loss SGD pass bank. Learning rate follows the
// classic schedule eta_t = eta0 / (1 + reg * eta0 * t); the weight
// decays by (1 - eta_t * reg) every step and moves along the margin
// gradient only on violations.
std::pair<Eigen::RowVectorXd, double> train_binary(const std::vector<LabeledExample>& examples,
                                                   const std::string& positive, double reg,
                                                   int epochs, double eta0, std::uint64_t seed,
                                                   Eigen::Index dim) {
  Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(dim);
  double b = 0.0;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double t = 0.0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const auto& ex = examples[idx];
      const double y = ex.label == positive ? 1.0 : -1.0;
      const double eta = eta0 / (1.0 + reg * eta0 * t);
      const double margin = y * (w.dot(ex.features) + b);
      w *= (1.0 - eta * reg);
      if (margin < 1.0) {
        w += (eta * y) * ex.features.transpose();
        b += eta * y;  // bias is not regularized
      }
      t += 1.0;
    }
  }
  return {std::move(w), b};
}

}  // namespace

LinearClassifier train_ova(const std::vector<LabeledExample>& examples, const OvaOptions& options) {
  if (examples.empty()) throw ContractError("train_ova: no examples");
  if (options.epochs < 1) throw ContractError("train_ova: epochs must be >= 1");
  if (options.regularization <= 0.0) throw ContractError("train_ova: regularization must be > 0");
  if (options.eta0 <= 0.0) throw ContractError("train_ova: eta0 must be > 0");
  const Eigen::Index dim = examples.front().features.size();
  if (dim == 0) throw ContractError("train_ova: zero-dimensional features");
  std::vector<std::string> classes;
  for (const auto& ex : examples) {
    if (ex.features.size() != dim) throw ContractError("train_ova: inconsistent feature dims");
    classes.push_back(ex.label);
  }
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw ContractError("train_ova: needs at least 2 classes");

  Eigen::MatrixXd weights(static_cast<Eigen::Index>(classes.size()), dim);
  Eigen::VectorXd biases(weights.rows());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    // Distinct stream per class so training one class never perturbs
    // another; the offset constant spreads seeds apart.
    const std::uint64_t class_seed = options.seed + static_cast<std::uint64_t>(c) * 0x9e3779b97f4a7c15ULL;
    auto [w, b] = train_binary(examples, classes[c], options.regularization, options.epochs,
                               options.eta0, class_seed, dim);
    weights.row(static_cast<Eigen::Index>(c)) = w;
    biases(static_cast<Eigen::Index>(c)) = b;
  }
  return LinearClassifier(std::move(classes), std::move(weights), std::move(biases), options);
}

ConfusionResult confusion_matrix(const LinearClassifier& clf,
                                 const std::vector<LabeledExample>& test) {
  if (test.empty()) throw ContractError("confusion_matrix: no test examples");
  std::unordered_map<std::string, Eigen::Index> class_index;
  for (std::size_t i = 0; i < clf.classes().size(); ++i)
    class_index[clf.classes()[i]] = static_cast<Eigen::Index>(i);

  const Eigen::Index n = static_cast<Eigen::Index>(clf.classes().size());
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, n);
  std::size_t correct = 0;
  for (const auto& ex : test) {
    const auto gold = class_index.find(ex.label);
    if (gold == class_index.end())
      throw ContractError("confusion_matrix: unknown test class: " + ex.label);
    const std::string predicted = clf.predict(ex.features);
    counts(gold->second, class_index.at(predicted)) += 1.0;
    if (predicted == ex.label) ++correct;
  }

  ConfusionResult result;
  result.classes = clf.classes();
  result.proportions = counts;
  for (Eigen::Index r = 0; r < n; ++r) {
    const double row_sum = counts.row(r).sum();
    if (row_sum > 0.0) result.proportions.row(r) /= row_sum;
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  return result;
}

void save_attribute_vectors(const std::vector<AttributeVector>& vectors,
                            const std::vector<std::string>& adjective_vocab,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  for (const auto& av : vectors) {
    if (av.values.size() != static_cast<Eigen::Index>(adjective_vocab.size()))
      throw ContractError("attribute vector does not match vocabulary size: " + av.image_id);
    out << av.image_id << "\t\t" << linalg::format_double(av.sparsity_threshold) << '\n';
    for (Eigen::Index i = 0; i < av.values.size(); ++i) {
      if (av.values(i) == 0.0) continue;
      out << av.image_id << '\t' << adjective_vocab[static_cast<std::size_t>(i)] << '\t'
          << linalg::format_double(av.values(i)) << '\n';
    }
  }
}

std::vector<AttributeVector> load_attribute_vectors(const std::filesystem::path& path,
                                                    const std::vector<std::string>& adjective_vocab) {
  std::unordered_map<std::string, Eigen::Index> vocab_index;
  for (std::size_t i = 0; i < adjective_vocab.size(); ++i)
    vocab_index[adjective_vocab[i]] = static_cast<Eigen::Index>(i);

  const std::string text = detail::read_file(path);
  std::vector<AttributeVector> out;
  std::unordered_map<std::string, std::size_t> position;
  for (const auto& line : detail::data_lines(text)) {
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 3)
      throw FormatError(path.string() + ": expected 3 tab-separated fields: '" +
                        std::string(line) + "'");
    const std::string image_id(fields[0]);
    if (image_id.empty()) throw FormatError(path.string() + ": empty image id");
    const double value = detail::parse_double(fields[2], path.string());
    auto it = position.find(image_id);
    if (fields[1].empty()) {
      // Threshold row opens a new image block.
      if (it != position.end())
        throw FormatError(path.string() + ": repeated threshold row for " + image_id);
      position[image_id] = out.size();
      AttributeVector av;
      av.image_id = image_id;
      av.sparsity_threshold = value;
      av.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(adjective_vocab.size()));
      out.push_back(std::move(av));
      continue;
    }
    if (it == position.end())
      throw FormatError(path.string() + ": entry before threshold row for " + image_id);
    const auto vi = vocab_index.find(std::string(fields[1]));
    if (vi == vocab_index.end())
      throw FormatError(path.string() + ": adjective not in vocabulary: " + std::string(fields[1]));
    out[it->second].values(vi->second) = value;
  }
  if (out.empty()) throw FormatError(path.string() + ": no attribute vectors");
  return out;
}

void save_classifier(const LinearClassifier& clf, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << clf.to_json().dump(2) << '\n';
}

LinearClassifier load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("classifier parse: ") + e.what());
  }
  return LinearClassifier::from_json(j);
}

}  // namespace visphrase
