#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "visphrase/types.hpp"

namespace visphrase {

// A labeled collection of fixed-dimension real vectors with optional
// part-of-speech tags and frequency ranks. Serves as both the visual
// space and the linguistic space. Immutable after loading; share freely
// across threads.
class EmbeddingSpace {
 public:
  // `vectors` holds one entry per row, in the same order as `labels`.
  EmbeddingSpace(std::vector<std::string> labels, Eigen::MatrixXd vectors);

  int dim() const { return static_cast<int>(vectors_.cols()); }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const Eigen::MatrixXd& matrix() const { return vectors_; }

  bool contains(const std::string& label) const;
  // -1 when absent.
  int index_of(const std::string& label) const;
  const std::string& label_at(int index) const { return labels_.at(index); }
  // Throws ContractError when the label is absent.
  Eigen::VectorXd vector(const std::string& label) const;

  // Tags must cover every label in the space; extra entries are ignored.
  void set_pos_tags(const std::unordered_map<std::string, Pos>& tags);
  bool has_pos_tags() const { return !pos_.empty(); }
  std::optional<Pos> pos(const std::string& label) const;

  // Ranks are 1-based corpus frequency order; must be positive.
  void set_frequency_ranks(const std::unordered_map<std::string, int>& ranks);
  bool has_frequency_ranks() const { return !frequency_rank_.empty(); }
  std::optional<int> frequency_rank(const std::string& label) const;

  // The n most frequent labels, optionally limited to one part of
  // speech. Falls back to insertion order when no ranks are attached.
  LabelSet top_by_frequency(std::size_t n, std::optional<Pos> filter = std::nullopt) const;

 private:
  std::vector<std::string> labels_;
  Eigen::MatrixXd vectors_;  // size() x dim()
  std::unordered_map<std::string, int> index_;
  std::vector<Pos> pos_;                              // empty or size()
  std::unordered_map<std::string, int> frequency_rank_;
};

enum class SpaceFormat { Word2VecText, Tsv };

// word2vec text: header "<count> <dim>", then "<label> v1 ... vd".
// tsv: rows "label\tv1\t...\tvd", dimension fixed by the first row.
EmbeddingSpace load_space(const std::filesystem::path& path, SpaceFormat format);
std::string to_word2vec_text(const EmbeddingSpace& space);
void save_space(const EmbeddingSpace& space, const std::filesystem::path& path);

// Sidecar files: "label\ttag" with tags ADJ / NOUN / OTHER, and
// "label\trank" with positive integer ranks.
std::unordered_map<std::string, Pos> load_pos_sidecar(const std::filesystem::path& path);
std::unordered_map<std::string, int> load_frequency_sidecar(const std::filesystem::path& path);

// Plain cosine; throws NumericError when either vector has zero norm,
// ContractError on length mismatch.
double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

// Top-k labels by cosine to `query`, optionally filtered by part of
// speech and/or an explicit candidate set. Fewer than k items are
// returned only when the filtered pool is smaller than k.
Ranking nearest(const EmbeddingSpace& space, const Eigen::VectorXd& query, int k,
                std::optional<Pos> pos_filter = std::nullopt,
                const LabelSet* restrict_to = nullptr, std::string query_id = "");

}  // namespace visphrase
