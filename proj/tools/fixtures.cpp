#include "fixtures.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include "config.hpp"
#include "visphrase/error.hpp"
#include "visphrase/linalg.hpp"
#include "visphrase/types.hpp"

namespace visphrase::tools {

namespace {

void validate(const FixtureParams& p) {
  if (p.attribute_dims < 1 || p.attribute_dims >= p.word_dim) {
    throw ContractError("fixtures: attribute_dims must be in [1, word_dim)");
  }
  if (p.adjectives < 2 || p.nouns < 2 || p.image_dim < 1) {
    throw ContractError("fixtures: need at least two adjectives and nouns");
  }
  if (p.pairs_per_noun < 1 || p.pairs_per_noun > p.adjectives) {
    throw ContractError("fixtures: pairs_per_noun must be in [1, adjectives]");
  }
  if (p.test_nouns < 1 || p.test_nouns >= p.nouns) {
    throw ContractError("fixtures: test_nouns must leave at least one training noun");
  }
  if (p.classify_classes < 2 || p.classify_classes > p.nouns - p.test_nouns) {
    throw ContractError("fixtures: classify_classes must fit into the training nouns");
  }
  if (p.cross_leak < 0.0 || p.image_noise < 0.0 || p.phrase_noise < 0.0 ||
      p.classify_noise < 0.0) {
    throw ContractError("fixtures: noise and leak magnitudes must be non-negative");
  }
}

// Fisher-Yates on indices; rng-order stable regardless of content.
std::vector<int> shuffled_indices(int n, std::mt19937_64& rng) {
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  return order;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write file: " + path.string());
  out << content;
}

}  // namespace

FixtureWorld make_world(const FixtureParams& p) {
  validate(p);
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Words: anisotropic blocks with cross leak.
  const int n_words = p.adjectives + p.nouns;
  std::vector<std::string> word_labels;
  word_labels.reserve(n_words);
  Eigen::MatrixXd word_rows(n_words, p.word_dim);
  std::unordered_map<std::string, Pos> pos_tags;
  for (int i = 0; i < p.adjectives; ++i) {
    word_labels.push_back("adj" + std::to_string(i));
    for (int d = 0; d < p.word_dim; ++d) {
      const double weight = d < p.attribute_dims ? 1.0 : p.cross_leak;
      word_rows(i, d) = weight * gauss(rng);
    }
    pos_tags[word_labels.back()] = Pos::Adj;
  }
  for (int j = 0; j < p.nouns; ++j) {
    word_labels.push_back("noun" + std::to_string(j));
    for (int d = 0; d < p.word_dim; ++d) {
      const double weight = d < p.attribute_dims ? p.cross_leak : 1.0;
      word_rows(p.adjectives + j, d) = weight * gauss(rng);
    }
    pos_tags[word_labels.back()] = Pos::Noun;
  }

  // Rendering map from the linguistic space into image features.
  Eigen::MatrixXd render(p.image_dim, p.word_dim);
  for (int r = 0; r < p.image_dim; ++r)
    for (int c = 0; c < p.word_dim; ++c) render(r, c) = gauss(rng);

  // Pair structure and corpus counts.
  std::vector<std::vector<int>> noun_partners(p.nouns);
  std::unordered_map<std::string, std::uint64_t> unigrams, bigrams;
  std::unordered_map<std::string, std::vector<std::pair<std::string, std::uint64_t>>> cooc;
  std::uniform_int_distribution<int> pair_count(1, 80);
  for (int j = 0; j < p.nouns; ++j) {
    auto order = shuffled_indices(p.adjectives, rng);
    order.resize(p.pairs_per_noun);
    noun_partners[j] = order;
    const std::string noun = "noun" + std::to_string(j);
    for (int a : order) {
      const std::string adj = "adj" + std::to_string(a);
      const std::uint64_t count = static_cast<std::uint64_t>(pair_count(rng));
      bigrams[adj + "\t" + noun] = count;
      cooc[noun].emplace_back(adj, count);
      unigrams[adj] += count;
      unigrams[noun] += count;
    }
  }
  std::uniform_int_distribution<int> extra(20, 400);
  for (int i = 0; i < p.adjectives; ++i) {
    unigrams["adj" + std::to_string(i)] += static_cast<std::uint64_t>(extra(rng));
  }
  for (int j = 0; j < p.nouns; ++j) {
    unigrams["noun" + std::to_string(j)] += static_cast<std::uint64_t>(extra(rng));
  }

  // Frequency ranks: unigram count descending, label ascending on ties.
  std::vector<std::string> by_frequency = word_labels;
  std::sort(by_frequency.begin(), by_frequency.end(),
            [&](const std::string& a, const std::string& b) {
              const auto ca = unigrams.at(a), cb = unigrams.at(b);
              if (ca != cb) return ca > cb;
              return a < b;
            });
  std::unordered_map<std::string, int> ranks;
  for (std::size_t i = 0; i < by_frequency.size(); ++i) {
    ranks[by_frequency[i]] = static_cast<int>(i) + 1;
  }

  EmbeddingSpace words(word_labels, word_rows);
  words.set_pos_tags(pos_tags);
  words.set_frequency_ranks(ranks);

  // Corpus phrase vectors: average of constituents plus corpus noise.
  std::vector<std::string> phrase_labels;
  std::vector<PhraseTriple> triples;
  Eigen::MatrixXd phrase_rows(p.nouns * p.pairs_per_noun, p.word_dim);
  int phrase_row = 0;
  for (int j = 0; j < p.nouns; ++j) {
    const std::string noun = "noun" + std::to_string(j);
    for (int a : noun_partners[j]) {
      const std::string adj = "adj" + std::to_string(a);
      const std::string phrase = adj + "_" + noun;
      Eigen::VectorXd v = 0.5 * (word_rows.row(a) + word_rows.row(p.adjectives + j)).transpose();
      for (int d = 0; d < p.word_dim; ++d) v(d) += p.phrase_noise * gauss(rng);
      phrase_rows.row(phrase_row++) = v.transpose();
      phrase_labels.push_back(phrase);
      triples.push_back({phrase, adj, noun});
    }
  }
  EmbeddingSpace phrases(phrase_labels, phrase_rows);

  // Zero-shot split over object labels.
  const auto noun_order = shuffled_indices(p.nouns, rng);
  std::vector<bool> is_test_noun(p.nouns, false);
  for (int t = 0; t < p.test_nouns; ++t) is_test_noun[noun_order[t]] = true;

  FixtureWorld world{std::move(words), std::move(phrases)};
  world.triples = std::move(triples);
  world.unigram_counts = std::move(unigrams);
  world.bigram_counts = std::move(bigrams);
  world.cooc = std::move(cooc);

  const auto render_image = [&](int adj_idx, int noun_idx, double noise) {
    Eigen::VectorXd composed =
        0.5 * (word_rows.row(adj_idx) + word_rows.row(p.adjectives + noun_idx)).transpose();
    Eigen::VectorXd v = render * composed;
    for (int d = 0; d < p.image_dim; ++d) v(d) += noise * gauss(rng);
    return v;
  };

  int train_seq = 0, test_seq = 0;
  for (int j = 0; j < p.nouns; ++j) {
    const std::string noun = "noun" + std::to_string(j);
    for (int a : noun_partners[j]) {
      const std::string adj = "adj" + std::to_string(a);
      if (is_test_noun[j]) {
        for (int i = 0; i < p.test_images_per_pair; ++i) {
          world.test_image_ids.push_back("te" + std::to_string(test_seq++));
          world.test_images.push_back(render_image(a, j, p.image_noise));
          world.gold.push_back({world.test_image_ids.back(), {adj}, noun});
        }
      } else {
        for (int i = 0; i < p.train_images_per_pair; ++i) {
          world.train_image_ids.push_back("tr" + std::to_string(train_seq++));
          world.train_images.push_back(render_image(a, j, p.image_noise));
          world.train_image_nouns.push_back(noun);
          world.train_image_adjectives.push_back(adj);
        }
      }
    }
  }

  std::uniform_real_distribution<double> concrete(1.0, 5.0);
  for (int j = 0; j < p.nouns; ++j) {
    world.noun_concreteness["noun" + std::to_string(j)] = concrete(rng);
  }

  // Object classification data over a few training nouns; each class
  // mixes its own typical adjectives so attribute vectors separate too.
  std::vector<int> class_nouns;
  for (int j = 0; j < p.nouns && static_cast<int>(class_nouns.size()) < p.classify_classes; ++j) {
    if (!is_test_noun[j]) class_nouns.push_back(j);
  }
  int ctr_seq = 0, cte_seq = 0;
  for (int j : class_nouns) {
    world.class_names.push_back("noun" + std::to_string(j));
  }
  for (std::size_t c = 0; c < class_nouns.size(); ++c) {
    const int j = class_nouns[c];
    const auto& partners = noun_partners[j];
    std::uniform_int_distribution<int> pick(0, static_cast<int>(partners.size()) - 1);
    for (int i = 0; i < p.classify_train_per_class; ++i) {
      world.classify_train_ids.push_back("ctr" + std::to_string(ctr_seq++));
      world.classify_train_images.push_back(
          render_image(partners[pick(rng)], j, p.classify_noise));
      world.classify_train_labels.push_back(world.class_names[c]);
    }
    for (int i = 0; i < p.classify_test_per_class; ++i) {
      world.classify_test_ids.push_back("cte" + std::to_string(cte_seq++));
      world.classify_test_images.push_back(
          render_image(partners[pick(rng)], j, p.classify_noise));
      world.classify_test_labels.push_back(world.class_names[c]);
    }
  }
  return world;
}

namespace {

Config params_config(const FixtureParams& p) {
  Config cfg;
  cfg.set("fixtures", "adjectives", std::to_string(p.adjectives));
  cfg.set("fixtures", "nouns", std::to_string(p.nouns));
  cfg.set("fixtures", "word_dim", std::to_string(p.word_dim));
  cfg.set("fixtures", "attribute_dims", std::to_string(p.attribute_dims));
  cfg.set("fixtures", "cross_leak", linalg::format_double(p.cross_leak));
  cfg.set("fixtures", "image_dim", std::to_string(p.image_dim));
  cfg.set("fixtures", "pairs_per_noun", std::to_string(p.pairs_per_noun));
  cfg.set("fixtures", "train_images_per_pair", std::to_string(p.train_images_per_pair));
  cfg.set("fixtures", "test_nouns", std::to_string(p.test_nouns));
  cfg.set("fixtures", "test_images_per_pair", std::to_string(p.test_images_per_pair));
  cfg.set("fixtures", "image_noise", linalg::format_double(p.image_noise));
  cfg.set("fixtures", "phrase_noise", linalg::format_double(p.phrase_noise));
  cfg.set("fixtures", "classify_classes", std::to_string(p.classify_classes));
  cfg.set("fixtures", "classify_train_per_class", std::to_string(p.classify_train_per_class));
  cfg.set("fixtures", "classify_test_per_class", std::to_string(p.classify_test_per_class));
  cfg.set("fixtures", "classify_noise", linalg::format_double(p.classify_noise));
  cfg.set("fixtures", "seed", std::to_string(p.seed));
  return cfg;
}

std::string image_tsv(const std::vector<std::string>& ids,
                      const std::vector<Eigen::VectorXd>& images) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += ids[i];
    for (Eigen::Index d = 0; d < images[i].size(); ++d) {
      out += '\t';
      out += linalg::format_double(images[i](d));
    }
    out += '\n';
  }
  return out;
}

std::string pair_tsv(const std::vector<std::string>& ids,
                     const std::vector<std::string>& labels) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += ids[i];
    out += '\t';
    out += labels[i];
    out += '\n';
  }
  return out;
}

}  // namespace

void write_world(const FixtureWorld& world, const FixtureParams& params,
                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::filesystem::create_directories(dir / "out");
  const std::string meta = "# generator_hash=" + params_config(params).hash() +
                           "\n# version=" + std::string(kLibraryVersion) + "\n";

  write_text(dir / "words.txt", meta + to_word2vec_text(world.words));
  write_text(dir / "phrases.txt", meta + to_word2vec_text(world.phrases));

  std::string pos = meta;
  std::string freq = meta;
  for (const auto& label : world.words.labels()) {
    pos += label;
    pos += '\t';
    pos += pos_name(*world.words.pos(label));
    pos += '\n';
    freq += label;
    freq += '\t';
    freq += std::to_string(*world.words.frequency_rank(label));
    freq += '\n';
  }
  write_text(dir / "words_pos.tsv", pos);
  write_text(dir / "words_freq.tsv", freq);

  std::string triples = meta;
  for (const auto& t : world.triples) {
    triples += t.phrase;
    triples += '\t';
    triples += t.adjective;
    triples += '\t';
    triples += t.noun;
    triples += '\n';
  }
  write_text(dir / "triples.tsv", triples);

  write_text(dir / "train_images.tsv", meta + image_tsv(world.train_image_ids, world.train_images));
  write_text(dir / "pairs_nouns.tsv",
             meta + pair_tsv(world.train_image_ids, world.train_image_nouns));
  write_text(dir / "pairs_adjectives.tsv",
             meta + pair_tsv(world.train_image_ids, world.train_image_adjectives));
  write_text(dir / "test_images.tsv", meta + image_tsv(world.test_image_ids, world.test_images));

  std::string gold = meta;
  for (const auto& g : world.gold) {
    gold += g.image_id;
    gold += '\t';
    gold += g.gold_noun ? *g.gold_noun : "-";
    gold += '\t';
    bool first = true;
    std::vector<std::string> adjectives(g.gold_adjectives.begin(), g.gold_adjectives.end());
    std::sort(adjectives.begin(), adjectives.end());
    for (const auto& a : adjectives) {
      if (!first) gold += ',';
      gold += a;
      first = false;
    }
    gold += '\n';
  }
  write_text(dir / "gold.tsv", gold);

  // Corpus tables in label order so reruns are byte-identical.
  std::string bigrams = meta + "[unigrams]\n";
  for (const auto& label : world.words.labels()) {
    bigrams += label;
    bigrams += '\t';
    bigrams += std::to_string(world.unigram_counts.at(label));
    bigrams += '\n';
  }
  bigrams += "[bigrams]\n";
  std::string cooc;
  for (const auto& t : world.triples) {
    const auto count = world.bigram_counts.at(t.adjective + "\t" + t.noun);
    bigrams += t.adjective;
    bigrams += '\t';
    bigrams += t.noun;
    bigrams += '\t';
    bigrams += std::to_string(count);
    bigrams += '\n';
    cooc += t.noun;
    cooc += '\t';
    cooc += t.adjective;
    cooc += '\t';
    cooc += std::to_string(count);
    cooc += '\n';
  }
  write_text(dir / "bigrams.tsv", bigrams);
  write_text(dir / "cooc.tsv", meta + cooc);

  std::string concreteness = meta;
  for (int j = 0; j < params.nouns; ++j) {
    const std::string noun = "noun" + std::to_string(j);
    concreteness += noun;
    concreteness += '\t';
    concreteness += linalg::format_double(world.noun_concreteness.at(noun));
    concreteness += '\n';
  }
  write_text(dir / "concreteness.tsv", concreteness);

  write_text(dir / "classify_train.tsv",
             meta + image_tsv(world.classify_train_ids, world.classify_train_images));
  write_text(dir / "classify_train_labels.tsv",
             meta + pair_tsv(world.classify_train_ids, world.classify_train_labels));
  write_text(dir / "classify_test.tsv",
             meta + image_tsv(world.classify_test_ids, world.classify_test_images));
  write_text(dir / "classify_test_labels.tsv",
             meta + pair_tsv(world.classify_test_ids, world.classify_test_labels));

  std::string config = meta;
  config +=
      "[run]\n"
      "seed = " +
      std::to_string(params.seed) +
      "\n"
      "\n[paths]\n"
      "word_space = words.txt\n"
      "word_pos = words_pos.tsv\n"
      "word_freq = words_freq.tsv\n"
      "phrase_space = phrases.txt\n"
      "triples = triples.tsv\n"
      "train_images = train_images.tsv\n"
      "pairs = pairs_nouns.tsv\n"
      "test_images = test_images.tsv\n"
      "gold = gold.tsv\n"
      "bigrams = bigrams.tsv\n"
      "cooc = cooc.tsv\n"
      "concreteness = concreteness.tsv\n"
      "model = out/model.json\n"
      "dec_model = out/dec_model.json\n"
      "annotations = out/annotations.tsv\n"
      "attributes = out/attributes.tsv\n"
      "classify_train = classify_train.tsv\n"
      "classify_train_labels = classify_train_labels.tsv\n"
      "classify_test = classify_test.tsv\n"
      "classify_test_labels = classify_test_labels.tsv\n"
      "output_dir = out\n"
      "\n[projection]\n"
      "method = ridge\n"
      "lambda = auto\n"
      "folds = 5\n"
      "leave_one_out = false\n"
      "\n[decomposition]\n"
      "lambda = auto\n"
      "balance_cap = 100\n"
      "\n[annotate]\n"
      "mode = dec\n"
      "k = 10\n"
      "noun_k = 10\n"
      "pool = adjectives\n"
      "top_frequent = 0\n"
      "sp_threshold = 20\n"
      "\n[evaluate]\n"
      "ks = 1,5,10\n"
      "auc = false\n"
      "mean_rank = false\n"
      "concreteness = false\n"
      "\n[represent]\n"
      "scope = per_image\n"
      "\n[classify]\n"
      "variant = all\n"
      "fused_dim = 16\n"
      "regularization = 0.001\n"
      "epochs = 200\n"
      "eta0 = 1.0\n";
  write_text(dir / "config.ini", config);
}

}  // namespace visphrase::tools
