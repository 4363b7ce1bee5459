#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "support/oracles.hpp"
#include "visphrase/error.hpp"
#include "visphrase/evaluation.hpp"

using namespace visphrase;

namespace {

Ranking ranked(const std::string& id, const std::vector<std::string>& order) {
  std::vector<ScoredLabel> items;
  double score = static_cast<double>(order.size());
  for (const auto& label : order) items.push_back({label, score--});
  return make_ranking(id, items);
}

GoldAnnotation gold(const std::string& id, LabelSet adjectives) {
  return {id, std::move(adjectives), std::nullopt};
}

EmbeddingSpace random_space(int n, int dim, std::uint64_t seed) {
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

}  // namespace

TEST_CASE("gold file parses nouns, '-' placeholders, and comma lists") {
  const auto path = std::filesystem::temp_directory_path() / "vp_gold.tsv";
  {
    std::ofstream out(path);
    out << "img1\tcat\tfurry,small\nimg2\t-\tshiny\n";
  }
  const auto entries = load_gold(path);
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].image_id == "img1");
  CHECK(entries[0].gold_noun == std::optional<std::string>("cat"));
  CHECK(entries[0].gold_adjectives == LabelSet{"furry", "small"});
  CHECK_FALSE(entries[1].gold_noun.has_value());

  const auto dup = std::filesystem::temp_directory_path() / "vp_gold_dup.tsv";
  {
    std::ofstream out(dup);
    out << "img1\tcat\tfurry\nimg1\tdog\tloyal\n";
  }
  CHECK_THROWS_AS(load_gold(dup), FormatError);
}

TEST_CASE("hit_at_k on the worked example") {
  const std::vector<Ranking> rankings{ranked("img1", {"furry", "big", "odd"}),
                                      ranked("img2", {"dull", "red", "shiny"})};
  const std::vector<GoldAnnotation> entries{gold("img1", {"furry"}), gold("img2", {"shiny"})};
  const auto h = hit_at_k(rankings, entries, {1, 3});
  CHECK(h.at(1) == doctest::Approx(50.0));
  CHECK(h.at(3) == doctest::Approx(100.0));
}

TEST_CASE("hit_at_k is zero when gold never appears") {
  const std::vector<Ranking> rankings{ranked("img1", {"a", "b"})};
  const std::vector<GoldAnnotation> entries{gold("img1", {"z"})};
  CHECK(hit_at_k(rankings, entries, {2}).at(2) == 0.0);
}

TEST_CASE("recall_at_k on the worked example") {
  // Two gold adjectives, one inside the top-2: recall 50%.
  const std::vector<Ranking> rankings{ranked("img1", {"furry", "big", "small"})};
  const std::vector<GoldAnnotation> entries{gold("img1", {"furry", "small"})};
  CHECK(recall_at_k(rankings, entries, {2}).at(2) == doctest::Approx(50.0));
  CHECK(recall_at_k(rankings, entries, {3}).at(3) == doctest::Approx(100.0));
}

TEST_CASE("hit and recall match a linear-scan oracle on random data") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 19);
  std::vector<std::string> vocabulary;
  for (int i = 0; i < 20; ++i) vocabulary.push_back("adj" + std::to_string(i));

  std::vector<Ranking> rankings;
  std::vector<GoldAnnotation> entries;
  for (int img = 0; img < 30; ++img) {
    std::vector<ScoredLabel> items;
    for (const auto& label : vocabulary) items.push_back({label, gauss(rng)});
    rankings.push_back(make_ranking("img" + std::to_string(img), items));
    LabelSet g;
    const int count = 1 + pick(rng) % 3;
    while (static_cast<int>(g.size()) < count) g.insert(vocabulary[pick(rng)]);
    entries.push_back(gold("img" + std::to_string(img), g));
  }
  std::vector<std::vector<std::string>> plain_orders;
  std::vector<std::set<std::string>> plain_gold;
  for (const auto& ranking : rankings) {
    std::vector<std::string> order;
    for (const auto& item : ranking.items) order.push_back(item.label);
    plain_orders.push_back(order);
  }
  for (const auto& entry : entries)
    plain_gold.emplace_back(entry.gold_adjectives.begin(), entry.gold_adjectives.end());

  const std::vector<int> ks{1, 5, 10, 20};
  const auto h = hit_at_k(rankings, entries, ks);
  const auto r = recall_at_k(rankings, entries, ks);
  for (int k : ks) {
    CHECK(h.at(k) ==
          doctest::Approx(oracle::hit_at_k_scan(plain_orders, plain_gold, k)).epsilon(1e-12));
    CHECK(r.at(k) ==
          doctest::Approx(oracle::recall_at_k_scan(plain_orders, plain_gold, k)).epsilon(1e-12));
    CHECK(h.at(k) >= r.at(k));  // hit counts any gold; recall averages fractions
  }
  // Both metrics are non-decreasing in k.
  for (std::size_t i = 1; i < ks.size(); ++i) {
    CHECK(h.at(ks[i]) >= h.at(ks[i - 1]));
    CHECK(r.at(ks[i]) >= r.at(ks[i - 1]));
  }
}

TEST_CASE("metrics require aligned ids") {
  const std::vector<Ranking> rankings{ranked("img1", {"a"}), ranked("img3", {"a"})};
  const std::vector<GoldAnnotation> entries{gold("img1", {"a"}), gold("img2", {"a"})};
  CHECK_THROWS_AS(hit_at_k(rankings, entries, {1}), AlignmentError);
  try {
    hit_at_k(rankings, entries, {1});
  } catch (const AlignmentError& e) {
    const std::string what = e.what();
    CHECK(what.find("img2") != std::string::npos);
    CHECK(what.find("img3") != std::string::npos);
  }
}

TEST_CASE("auc separates perfectly ordered scores") {
  CHECK(auc({{"p1", 3.0}, {"p2", 2.5}, {"n1", 1.0}, {"n2", 0.5}}, {"p1", "p2"}) == 1.0);
  CHECK(auc({{"p1", 0.1}, {"n1", 5.0}}, {"p1"}) == 0.0);
}

TEST_CASE("auc gives ties half credit") {
  CHECK(auc({{"p1", 1.0}, {"n1", 1.0}, {"p2", 1.0}, {"n2", 1.0}}, {"p1", "p2"}) ==
        doctest::Approx(0.5));
}

TEST_CASE("auc requires both classes") {
  CHECK_THROWS_AS(auc({{"a", 1.0}, {"b", 2.0}}, {"a", "b"}), NumericError);
  CHECK_THROWS_AS(auc({{"a", 1.0}, {"b", 2.0}}, LabelSet{}), NumericError);
}

TEST_CASE("auc matches threshold-sweep and pairwise oracles on random scores") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<std::string, double>> scores;
    LabelSet positives;
    for (int i = 0; i < 40; ++i) {
      const std::string id = "s" + std::to_string(i);
      // Coarse grid so ties actually occur.
      scores.emplace_back(id, std::floor(unif(rng) * 8.0));
      if (unif(rng) < 0.4) positives.insert(id);
    }
    if (positives.empty() || positives.size() == scores.size()) continue;
    std::vector<double> pos, neg;
    for (const auto& [id, s] : scores) (positives.count(id) ? pos : neg).push_back(s);
    const double got = auc(scores, positives);
    CHECK(got == doctest::Approx(oracle::auc_threshold_sweep(pos, neg)).epsilon(1e-12));
    CHECK(got == doctest::Approx(oracle::auc_pairwise(pos, neg)).epsilon(1e-12));
  }
}

TEST_CASE("auc is invariant under monotone transforms and flips under negation") {
  std::mt19937_64 rng(37);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::pair<std::string, double>> scores, warped, negated;
  LabelSet positives;
  for (int i = 0; i < 30; ++i) {
    const std::string id = "s" + std::to_string(i);
    const double v = gauss(rng);  // continuous, ties almost surely absent
    scores.emplace_back(id, v);
    warped.emplace_back(id, std::exp(2.0 * v) + 3.0);
    negated.emplace_back(id, -v);
    if (i % 3 == 0) positives.insert(id);
  }
  const double base = auc(scores, positives);
  CHECK(auc(warped, positives) == doctest::Approx(base).epsilon(1e-12));
  CHECK(auc(negated, positives) == doctest::Approx(1.0 - base).epsilon(1e-12));
}

TEST_CASE("mean_attribute_rank averages one-based ranks") {
  const std::vector<Ranking> top{ranked("i1", {"x", "y"}), ranked("i2", {"x", "y"})};
  CHECK(mean_attribute_rank(top, "x") == doctest::Approx(1.0));
  const std::vector<Ranking> mixed{ranked("i1", {"a", "x", "y"}), ranked("i2", {"a", "y", "x"})};
  CHECK(mean_attribute_rank(mixed, "x") == doctest::Approx(2.5));
  CHECK_THROWS_AS(mean_attribute_rank({ranked("i1", {"a"})}, "x"), ContractError);
}

TEST_CASE("structure correlation of a rotated copy is one") {
  auto a = random_space(12, 6, 41);
  // Apply one orthonormal rotation to every row: cosines are preserved.
  Eigen::MatrixXd m(6, 6);
  std::mt19937_64 rng(43);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) m(i, j) = gauss(rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
  EmbeddingSpace b(a.labels(), (a.matrix() * q.transpose()).eval());

  const auto result = structure_correlation(a, b, a.labels(), CorrelationKind::Spearman, 200, 7);
  CHECK(result.rho == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(result.p_value < 0.05);
  CHECK(result.permutations == 200);

  const auto pearson = structure_correlation(a, b, a.labels(), CorrelationKind::Pearson, 200, 7);
  CHECK(pearson.rho == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("structure correlation of unrelated spaces is weak") {
  const auto a = random_space(20, 8, 47);
  const auto b = random_space(20, 8, 53);
  const auto result = structure_correlation(a, b, a.labels(), CorrelationKind::Spearman, 500, 7);
  CHECK(std::abs(result.rho) < 0.35);
  CHECK(result.p_value > 0.05);
}

TEST_CASE("structure correlation needs three shared labels") {
  const auto a = random_space(5, 4, 59);
  CHECK_THROWS_AS(
      structure_correlation(a, a, {a.labels()[0], a.labels()[1]}, CorrelationKind::Spearman, 10),
      ContractError);
}

TEST_CASE("structure correlation ignores per-space scaling") {
  const auto a = random_space(10, 5, 61);
  EmbeddingSpace scaled(a.labels(), (a.matrix() * 7.5).eval());
  const auto self = structure_correlation(a, scaled, a.labels(), CorrelationKind::Spearman, 100, 3);
  CHECK(self.rho == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("concreteness uses co-occurrence-weighted noun means") {
  // "wet" modifies water(2.0) x3 and idea(4.0) x1: (3*2 + 1*4)/4 = 2.5.
  ModifierCooc cooc({{"water", {{"wet", 3}}}, {"idea", {{"wet", 1}, {"vague", 5}}}});
  const std::unordered_map<std::string, double> concreteness{{"water", 2.0}, {"idea", 4.0}};
  const auto r = ranked("img", {"wet"});
  const auto result = concreteness_score(r, concreteness, cooc, 1);
  REQUIRE(result.defined);
  CHECK(result.score == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("concreteness averages over the top-n adjectives") {
  ModifierCooc cooc({{"rock", {{"hard", 10}}}, {"thought", {{"deep", 10}}}});
  const std::unordered_map<std::string, double> concreteness{{"rock", 2.0}, {"thought", 4.0}};
  const auto r = ranked("img", {"hard", "deep"});
  const auto result = concreteness_score(r, concreteness, cooc, 2);
  REQUIRE(result.defined);
  CHECK(result.score == doctest::Approx(3.0).epsilon(1e-12));  // (2 + 4) / 2
  // top_n = 1 only sees "hard".
  CHECK(concreteness_score(r, concreteness, cooc, 1).score == doctest::Approx(2.0));
}

TEST_CASE("concreteness excludes adjectives with no known noun") {
  ModifierCooc cooc({{"rock", {{"hard", 10}}}});
  const std::unordered_map<std::string, double> concreteness{{"rock", 2.0}};
  const auto r = ranked("img", {"hard", "mysterious"});
  const auto result = concreteness_score(r, concreteness, cooc, 2);
  REQUIRE(result.defined);
  CHECK(result.score == doctest::Approx(2.0));
  CHECK(result.excluded == std::vector<std::string>{"mysterious"});

  const auto none = concreteness_score(ranked("img", {"mysterious"}), concreteness, cooc, 1);
  CHECK_FALSE(none.defined);
  CHECK(none.excluded.size() == 1);
}

TEST_CASE("eval report serializes metrics and metadata") {
  EvalReport report;
  report.per_k[1] = {50.0, 25.0};
  report.per_k[5] = {80.0, 60.0};
  report.per_attribute_auc["furry"] = 0.75;
  report.metadata["model"] = "ridge";
  const auto j = report.to_json();
  CHECK(j.at("per_k").at("1").at("hit_percent").get<double>() == doctest::Approx(50.0));
  CHECK(j.at("per_k").at("5").at("recall_percent").get<double>() == doctest::Approx(60.0));
  CHECK(j.at("per_attribute_auc").at("furry").get<double>() == doctest::Approx(0.75));
  CHECK(j.at("metadata").at("model").get<std::string>() == "ridge");

  const auto table = report.to_table();
  CHECK(table.find("hit") != std::string::npos);
  CHECK(table.find("furry") != std::string::npos);
}
