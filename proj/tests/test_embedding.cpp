#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "support/oracles.hpp"
#include "visphrase/embedding.hpp"
#include "visphrase/error.hpp"

using namespace visphrase;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path;
}

EmbeddingSpace random_space(int n, int dim, unsigned seed) {
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

TEST_CASE("ranking construction sorts and rejects duplicates") {
  auto r = make_ranking("q", {{"b", 1.0}, {"a", 1.0}, {"c", 2.0}});
  CHECK(r.items[0].label == "c");
  CHECK(r.items[1].label == "a");  // tie with b broken lexicographically
  CHECK(r.items[2].label == "b");
  CHECK(r.rank_of("c") == 1);
  CHECK(r.rank_of("missing") == 0);
  CHECK_THROWS_AS(make_ranking("q", {{"a", 1.0}, {"a", 0.5}}), ContractError);
}

TEST_CASE("word2vec text load") {
  const auto path = temp_file("vp_space.txt",
                              "3 4\n"
                              "cat 1 0 0 0\n"
                              "dog 0 1 0 0\n"
                              "red 0 0 1 0\n");
  const auto space = load_space(path, SpaceFormat::Word2VecText);
  CHECK(space.size() == 3);
  CHECK(space.dim() == 4);
  CHECK(space.vector("dog")(1) == 1.0);
}

TEST_CASE("word2vec dimension mismatch is a format error") {
  const auto path = temp_file("vp_badspace.txt",
                              "1 300\n"
                              "cat 1 2 3\n");
  CHECK_THROWS_AS(load_space(path, SpaceFormat::Word2VecText), FormatError);
}

TEST_CASE("duplicate label is a format error") {
  const auto path = temp_file("vp_dupspace.txt",
                              "2 2\n"
                              "cat 1 2\n"
                              "cat 3 4\n");
  CHECK_THROWS_AS(load_space(path, SpaceFormat::Word2VecText), FormatError);
}

TEST_CASE("load, serialize, reload round trip") {
  const auto space = random_space(10, 6, 7);
  const auto path = std::filesystem::temp_directory_path() / "vp_roundtrip.txt";
  save_space(space, path);
  const auto again = load_space(path, SpaceFormat::Word2VecText);
  REQUIRE(again.size() == space.size());
  REQUIRE(again.dim() == space.dim());
  for (const auto& label : space.labels())
    CHECK((again.vector(label) - space.vector(label)).norm() == 0.0);
  // Serialization is canonical: a second write is byte-identical.
  const auto path2 = std::filesystem::temp_directory_path() / "vp_roundtrip2.txt";
  save_space(again, path2);
  std::ifstream a(path), b(path2);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
}

TEST_CASE("tsv load") {
  const auto path = temp_file("vp_space.tsv", "cat\t1\t2\ndog\t3\t4\n");
  const auto space = load_space(path, SpaceFormat::Tsv);
  CHECK(space.size() == 2);
  CHECK(space.dim() == 2);
  CHECK(space.vector("dog")(0) == 3.0);
}

TEST_CASE("pos sidecar attaches tags") {
  const auto vp = temp_file("vp_tagged.txt", "2 2\nfast 1 0\ncar 0 1\n");
  const auto sp = temp_file("vp_tags.tsv", "fast\tADJ\ncar\tNOUN\n");
  auto space = load_space(vp, SpaceFormat::Word2VecText);
  space.set_pos_tags(load_pos_sidecar(sp));
  CHECK(space.pos("fast") == Pos::Adj);
  CHECK(space.pos("car") == Pos::Noun);
}

TEST_CASE("pos tags must cover every label") {
  auto space = random_space(3, 2, 1);
  std::unordered_map<std::string, Pos> partial{{"w0", Pos::Adj}};
  CHECK_THROWS_AS(space.set_pos_tags(partial), ContractError);
}

TEST_CASE("cosine basics") {
  Eigen::VectorXd v(3);
  v << 1, 2, 3;
  CHECK(cosine(v, v) == doctest::Approx(1.0).epsilon(1e-12));
  Eigen::Vector2d e1(1, 0), e2(0, 1);
  CHECK(cosine(e1, e2) == 0.0);
  Eigen::VectorXd u(3);
  u << 4, 5, 6;
  CHECK(cosine(v, u) == doctest::Approx(0.974631846).epsilon(1e-9));
  CHECK_THROWS_AS(cosine(Eigen::Vector2d::Zero(), e1), NumericError);
  Eigen::VectorXd wrong(2);
  wrong << 1, 1;
  CHECK_THROWS_AS(cosine(v, wrong), ContractError);
}

TEST_CASE("cosine symmetry and positive scale invariance") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd u(5), v(5);
    for (int i = 0; i < 5; ++i) {
      u(i) = gauss(rng);
      v(i) = gauss(rng);
    }
    const double c = cosine(u, v);
    CHECK(cosine(v, u) == doctest::Approx(c).epsilon(1e-12));
    CHECK(cosine(3.7 * u, v) == doctest::Approx(c).epsilon(1e-12));
    CHECK(c >= -1.0 - 1e-12);
    CHECK(c <= 1.0 + 1e-12);
  }
}

TEST_CASE("nearest returns a stored vector's own label first") {
  const auto space = random_space(8, 4, 11);
  const auto r = nearest(space, space.vector("w3"), 1);
  REQUIRE(r.items.size() == 1);
  CHECK(r.items[0].label == "w3");
  CHECK(r.items[0].score == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("nearest with k larger than the pool returns the whole pool") {
  const auto space = random_space(5, 3, 2);
  const auto r = nearest(space, space.vector("w0"), 50);
  CHECK(r.items.size() == 5);
  for (std::size_t i = 1; i < r.items.size(); ++i)
    CHECK(r.items[i - 1].score >= r.items[i].score);
}

TEST_CASE("nearest matches the exhaustive-scan oracle") {
  const auto space = random_space(20, 6, 23);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd q(6);
    for (int i = 0; i < 6; ++i) q(i) = gauss(rng);
    std::vector<std::pair<std::string, double>> scored;
    for (const auto& label : space.labels()) scored.emplace_back(label, cosine(space.vector(label), q));
    const auto expected = oracle::rank_all(scored);
    const auto r = nearest(space, q, 20);
    REQUIRE(r.items.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(r.items[i].label == expected[i].first);
      CHECK(r.items[i].score == doctest::Approx(expected[i].second).epsilon(1e-12));
    }
  }
}

TEST_CASE("nearest prefix property") {
  const auto space = random_space(15, 4, 31);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd q(4);
  for (int i = 0; i < 4; ++i) q(i) = gauss(rng);
  for (int k = 1; k < 15; ++k) {
    const auto small = nearest(space, q, k);
    const auto big = nearest(space, q, k + 1);
    REQUIRE(big.items.size() >= small.items.size());
    for (std::size_t i = 0; i < small.items.size(); ++i)
      CHECK(small.items[i].label == big.items[i].label);
  }
}

TEST_CASE("pos filter yields a subsequence of the unfiltered ranking") {
  auto space = random_space(12, 4, 17);
  std::unordered_map<std::string, Pos> tags;
  for (int i = 0; i < 12; ++i) tags["w" + std::to_string(i)] = i % 2 == 0 ? Pos::Adj : Pos::Noun;
  space.set_pos_tags(tags);
  Eigen::VectorXd q = space.vector("w1");
  const auto all = nearest(space, q, 12);
  const auto adj = nearest(space, q, 12, Pos::Adj);
  std::size_t cursor = 0;
  for (const auto& item : adj.items) {
    while (cursor < all.items.size() && all.items[cursor].label != item.label) ++cursor;
    CHECK(cursor < all.items.size());
  }
  for (const auto& item : adj.items) CHECK(tags.at(item.label) == Pos::Adj);
}

TEST_CASE("empty pool after filtering") {
  auto space = random_space(4, 3, 13);
  std::unordered_map<std::string, Pos> tags;
  for (int i = 0; i < 4; ++i) tags["w" + std::to_string(i)] = Pos::Noun;
  space.set_pos_tags(tags);
  CHECK_THROWS_AS(nearest(space, space.vector("w0"), 1, Pos::Adj), EmptyPoolError);
  LabelSet empty_restrict{"not-there"};
  CHECK_THROWS_AS(nearest(space, space.vector("w0"), 1, std::nullopt, &empty_restrict),
                  EmptyPoolError);
}

TEST_CASE("restrict set limits candidates") {
  const auto space = random_space(10, 4, 41);
  LabelSet restrict_to{"w2", "w7"};
  const auto r = nearest(space, space.vector("w2"), 10, std::nullopt, &restrict_to);
  REQUIRE(r.items.size() == 2);
  CHECK(r.items[0].label == "w2");
}

TEST_CASE("top_by_frequency uses ranks when attached") {
  auto space = random_space(5, 3, 53);
  space.set_frequency_ranks({{"w0", 5}, {"w1", 1}, {"w2", 4}, {"w3", 2}, {"w4", 3}});
  const auto top2 = space.top_by_frequency(2);
  CHECK(top2.count("w1") == 1);
  CHECK(top2.count("w3") == 1);
}

TEST_CASE("frequency sidecar parses label-rank rows") {
  const auto path = temp_file("vp_freq.tsv", "cat\t1\ndog\t2\n");
  const auto ranks = load_frequency_sidecar(path);
  CHECK(ranks.at("cat") == 1);
  CHECK(ranks.at("dog") == 2);
}
