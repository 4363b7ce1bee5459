#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "visphrase/decomposition.hpp"
#include "visphrase/embedding.hpp"
#include "visphrase/evaluation.hpp"

namespace visphrase::tools {

// Knobs for the synthetic bimodal world. Words live in an anisotropic
// linguistic space: adjectives concentrate in the leading block, nouns
// in the trailing one, with `cross_leak` weight on the other block so
// the two populations overlap and neither can be linearly erased.
// Images are noisy linear renderings of adjective-noun compositions.
struct FixtureParams {
  int adjectives = 60;
  int nouns = 80;
  int word_dim = 16;
  int attribute_dims = 8;  // size of the adjective-dominant block
  double cross_leak = 0.4;
  int image_dim = 24;
  int pairs_per_noun = 6;
  int train_images_per_pair = 2;
  int test_nouns = 16;  // held-out object labels (zero-shot at test time)
  int test_images_per_pair = 1;
  double image_noise = 0.5;
  double phrase_noise = 0.0;
  int classify_classes = 3;
  int classify_train_per_class = 30;
  int classify_test_per_class = 10;
  double classify_noise = 0.35;
  std::uint64_t seed = 1;
};

struct FixtureWorld {
  EmbeddingSpace words;    // adjectives + nouns, pos-tagged, frequency-ranked
  EmbeddingSpace phrases;  // corpus phrase vectors backing the decomposition
  std::vector<PhraseTriple> triples;

  std::vector<std::string> train_image_ids;
  std::vector<Eigen::VectorXd> train_images;
  std::vector<std::string> train_image_nouns;       // object labels per image
  std::vector<std::string> train_image_adjectives;  // attribute labels per image

  std::vector<std::string> test_image_ids;
  std::vector<Eigen::VectorXd> test_images;
  std::vector<GoldAnnotation> gold;

  std::unordered_map<std::string, std::uint64_t> unigram_counts;
  std::unordered_map<std::string, std::uint64_t> bigram_counts;  // key "adj\tnoun"
  std::unordered_map<std::string, std::vector<std::pair<std::string, std::uint64_t>>> cooc;
  std::unordered_map<std::string, double> noun_concreteness;

  std::vector<std::string> class_names;  // object classes for classification
  std::vector<std::string> classify_train_ids;
  std::vector<Eigen::VectorXd> classify_train_images;
  std::vector<std::string> classify_train_labels;
  std::vector<std::string> classify_test_ids;
  std::vector<Eigen::VectorXd> classify_test_images;
  std::vector<std::string> classify_test_labels;
};

FixtureWorld make_world(const FixtureParams& params);

// Writes every data file plus a ready-to-run config.ini into `dir`.
// Outputs are stamped with the generator's parameter hash and version.
void write_world(const FixtureWorld& world, const FixtureParams& params,
                 const std::filesystem::path& dir);

}  // namespace visphrase::tools
