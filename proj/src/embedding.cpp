#include "visphrase/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "parse.hpp"
#include "visphrase/error.hpp"
#include "visphrase/linalg.hpp"

namespace visphrase {

EmbeddingSpace::EmbeddingSpace(std::vector<std::string> labels, Eigen::MatrixXd vectors)
    : labels_(std::move(labels)), vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(labels_.size()) != vectors_.rows()) {
    throw ContractError("EmbeddingSpace: label count does not match vector count");
  }
  if (vectors_.cols() < 1 && !labels_.empty()) {
    throw ContractError("EmbeddingSpace: dimension must be positive");
  }
  index_.reserve(labels_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!index_.emplace(labels_[i], static_cast<int>(i)).second) {
      throw ContractError("EmbeddingSpace: duplicate label '" + labels_[i] + "'");
    }
  }
}

bool EmbeddingSpace::contains(const std::string& label) const {
  return index_.find(label) != index_.end();
}

int EmbeddingSpace::index_of(const std::string& label) const {
  auto it = index_.find(label);
  return it == index_.end() ? -1 : it->second;
}

Eigen::VectorXd EmbeddingSpace::vector(const std::string& label) const {
  const int i = index_of(label);
  if (i < 0) throw ContractError("EmbeddingSpace: unknown label '" + label + "'");
  return vectors_.row(i);
}

void EmbeddingSpace::set_pos_tags(const std::unordered_map<std::string, Pos>& tags) {
  std::vector<Pos> pos(labels_.size(), Pos::Other);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    auto it = tags.find(labels_[i]);
    if (it == tags.end()) {
      throw ContractError("pos tags do not cover label '" + labels_[i] + "'");
    }
    pos[i] = it->second;
  }
  pos_ = std::move(pos);
}

std::optional<Pos> EmbeddingSpace::pos(const std::string& label) const {
  if (pos_.empty()) return std::nullopt;
  const int i = index_of(label);
  if (i < 0) return std::nullopt;
  return pos_[i];
}

void EmbeddingSpace::set_frequency_ranks(const std::unordered_map<std::string, int>& ranks) {
  for (const auto& [label, rank] : ranks) {
    if (rank < 1) throw ContractError("frequency rank must be positive for '" + label + "'");
  }
  frequency_rank_ = ranks;
}

std::optional<int> EmbeddingSpace::frequency_rank(const std::string& label) const {
  auto it = frequency_rank_.find(label);
  if (it == frequency_rank_.end()) return std::nullopt;
  return it->second;
}

LabelSet EmbeddingSpace::top_by_frequency(std::size_t n, std::optional<Pos> filter) const {
  // (rank, label) pairs; insertion order stands in for rank when the
  // space has no explicit frequency ranks.
  std::vector<std::pair<long long, const std::string*>> order;
  order.reserve(labels_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (filter && (!has_pos_tags() || pos_[i] != *filter)) continue;
    long long rank = static_cast<long long>(i) + 1;
    if (has_frequency_ranks()) {
      auto it = frequency_rank_.find(labels_[i]);
      // Unranked labels sort after every ranked one.
      rank = (it == frequency_rank_.end()) ? std::numeric_limits<long long>::max()
                                           : it->second;
    }
    order.emplace_back(rank, &labels_[i]);
  }
  std::sort(order.begin(), order.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first < b.first;
              return *a.second < *b.second;
            });
  LabelSet out;
  for (std::size_t i = 0; i < order.size() && i < n; ++i) out.insert(*order[i].second);
  return out;
}

namespace {

EmbeddingSpace parse_word2vec_text(const std::string& text, const std::string& origin) {
  const auto lines = detail::data_lines(text);
  if (lines.empty()) throw FormatError(origin + ": empty file");
  const auto header = detail::split_whitespace(lines[0]);
  if (header.size() != 2) {
    throw FormatError(origin + ": header must be '<count> <dim>'");
  }
  const long long count = detail::parse_integer(header[0], origin + " header");
  const long long dim = detail::parse_integer(header[1], origin + " header");
  if (count < 0 || dim < 1) throw FormatError(origin + ": invalid header counts");
  if (static_cast<long long>(lines.size()) - 1 != count) {
    throw FormatError(origin + ": header declares " + std::to_string(count) +
                      " entries but file has " + std::to_string(lines.size() - 1));
  }
  std::vector<std::string> labels;
  labels.reserve(count);
  Eigen::MatrixXd vectors(count, dim);
  for (long long r = 0; r < count; ++r) {
    const auto fields = detail::split_whitespace(lines[r + 1]);
    if (static_cast<long long>(fields.size()) != dim + 1) {
      throw FormatError(origin + ": row '" + std::string(fields.empty() ? lines[r + 1] : fields[0]) +
                        "' has " + std::to_string(fields.size() - 1) + " values, expected " +
                        std::to_string(dim));
    }
    labels.emplace_back(fields[0]);
    for (long long c = 0; c < dim; ++c) {
      vectors(r, c) = detail::parse_double(fields[c + 1], origin);
    }
  }
  try {
    return EmbeddingSpace(std::move(labels), std::move(vectors));
  } catch (const ContractError& e) {
    throw FormatError(origin + ": " + e.what());
  }
}

EmbeddingSpace parse_tsv(const std::string& text, const std::string& origin) {
  const auto lines = detail::data_lines(text);
  if (lines.empty()) throw FormatError(origin + ": empty file");
  std::vector<std::string> labels;
  std::vector<Eigen::VectorXd> rows;
  long long dim = -1;
  for (const auto line : lines) {
    const auto fields = detail::split(line, '\t');
    if (fields.size() < 2) throw FormatError(origin + ": row needs a label and values");
    if (dim < 0) dim = static_cast<long long>(fields.size()) - 1;
    if (static_cast<long long>(fields.size()) - 1 != dim) {
      throw FormatError(origin + ": row '" + std::string(fields[0]) + "' has " +
                        std::to_string(fields.size() - 1) + " values, expected " +
                        std::to_string(dim));
    }
    labels.emplace_back(fields[0]);
    Eigen::VectorXd v(dim);
    for (long long c = 0; c < dim; ++c) {
      v(c) = detail::parse_double(fields[c + 1], origin);
    }
    rows.push_back(std::move(v));
  }
  Eigen::MatrixXd vectors(rows.size(), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) vectors.row(r) = rows[r];
  try {
    return EmbeddingSpace(std::move(labels), std::move(vectors));
  } catch (const ContractError& e) {
    throw FormatError(origin + ": " + e.what());
  }
}

}  // namespace

EmbeddingSpace load_space(const std::filesystem::path& path, SpaceFormat format) {
  const std::string text = detail::read_file(path);
  switch (format) {
    case SpaceFormat::Word2VecText: return parse_word2vec_text(text, path.string());
    case SpaceFormat::Tsv: return parse_tsv(text, path.string());
  }
  throw ContractError("load_space: unknown format");
}

std::string to_word2vec_text(const EmbeddingSpace& space) {
  std::string out;
  out += std::to_string(space.size());
  out += ' ';
  out += std::to_string(space.dim());
  out += '\n';
  for (std::size_t i = 0; i < space.size(); ++i) {
    out += space.labels()[i];
    for (int c = 0; c < space.dim(); ++c) {
      out += ' ';
      out += linalg::format_double(space.matrix()(static_cast<Eigen::Index>(i), c));
    }
    out += '\n';
  }
  return out;
}

void save_space(const EmbeddingSpace& space, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write file: " + path.string());
  out << to_word2vec_text(space);
}

std::unordered_map<std::string, Pos> load_pos_sidecar(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  std::unordered_map<std::string, Pos> tags;
  for (const auto line : detail::data_lines(text)) {
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 2) {
      throw FormatError(path.string() + ": pos sidecar rows are 'label\\ttag'");
    }
    if (!tags.emplace(std::string(fields[0]), parse_pos(fields[1])).second) {
      throw FormatError(path.string() + ": duplicate label '" + std::string(fields[0]) + "'");
    }
  }
  return tags;
}

std::unordered_map<std::string, int> load_frequency_sidecar(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  std::unordered_map<std::string, int> ranks;
  for (const auto line : detail::data_lines(text)) {
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 2) {
      throw FormatError(path.string() + ": frequency sidecar rows are 'label\\trank'");
    }
    const long long rank = detail::parse_integer(fields[1], path.string());
    if (rank < 1) throw FormatError(path.string() + ": ranks must be positive");
    if (!ranks.emplace(std::string(fields[0]), static_cast<int>(rank)).second) {
      throw FormatError(path.string() + ": duplicate label '" + std::string(fields[0]) + "'");
    }
  }
  return ranks;
}

double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) {
    throw ContractError("cosine: vector lengths differ (" + std::to_string(u.size()) + " vs " +
                        std::to_string(v.size()) + ")");
  }
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) {
    throw NumericError("cosine: similarity undefined for zero-norm vector");
  }
  return u.dot(v) / (nu * nv);
}

Ranking nearest(const EmbeddingSpace& space, const Eigen::VectorXd& query, int k,
                std::optional<Pos> pos_filter, const LabelSet* restrict_to,
                std::string query_id) {
  if (k < 1) throw ContractError("nearest: k must be at least 1");
  if (query.size() != space.dim()) {
    throw ContractError("nearest: query dimension " + std::to_string(query.size()) +
                        " does not match space dimension " + std::to_string(space.dim()));
  }
  if (pos_filter && !space.has_pos_tags()) {
    throw ContractError("nearest: pos filter requested but space has no pos tags");
  }

  std::vector<ScoredLabel> scored;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const std::string& label = space.labels()[i];
    if (pos_filter && *space.pos(label) != *pos_filter) continue;
    if (restrict_to && restrict_to->find(label) == restrict_to->end()) continue;
    scored.push_back({label, cosine(query, space.matrix().row(static_cast<Eigen::Index>(i)))});
  }
  if (scored.empty()) {
    throw EmptyPoolError("nearest: candidate pool empty after filtering");
  }
  Ranking full = make_ranking(std::move(query_id), std::move(scored));
  if (static_cast<int>(full.items.size()) > k) full.items.resize(k);
  return full;
}

}  // namespace visphrase
