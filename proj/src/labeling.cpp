#include "visphrase/labeling.hpp"

#include <algorithm>

#include "parse.hpp"
#include "visphrase/error.hpp"

namespace visphrase {
namespace {

std::string bigram_key(const std::string& adjective, const std::string& noun) {
  return adjective + '\t' + noun;
}

}  // namespace

BigramTable::BigramTable(std::unordered_map<std::string, std::uint64_t> unigram_counts,
                         std::unordered_map<std::string, std::uint64_t> bigram_counts)
    : unigram_counts_(std::move(unigram_counts)), bigram_counts_(std::move(bigram_counts)) {
  for (const auto& [key, count] : bigram_counts_) {
    const auto tab = key.find('\t');
    if (tab == std::string::npos) throw ContractError("malformed bigram key");
    const std::string adjective = key.substr(0, tab);
    const std::string noun = key.substr(tab + 1);
    const auto a = unigram_counts_.find(adjective);
    const auto n = unigram_counts_.find(noun);
    if (a == unigram_counts_.end() || n == unigram_counts_.end())
      throw ContractError("bigram over unknown unigram: " + adjective + " " + noun);
    if (count > 0 && (a->second == 0 || n->second == 0))
      throw ContractError("bigram count exceeds unigram evidence: " + adjective + " " + noun);
  }
  for (const auto& [word, count] : unigram_counts_) total_unigrams_ += count;
}

BigramTable BigramTable::load(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  std::unordered_map<std::string, std::uint64_t> unigrams, bigrams;
  enum class Section { None, Unigrams, Bigrams } section = Section::None;
  for (const auto& line : detail::data_lines(text)) {
    if (line == "[unigrams]") {
      section = Section::Unigrams;
      continue;
    }
    if (line == "[bigrams]") {
      section = Section::Bigrams;
      continue;
    }
    const auto fields = detail::split(line, '\t');
    if (section == Section::Unigrams) {
      if (fields.size() != 2)
        throw FormatError(path.string() + ": unigram row needs 2 fields: '" + std::string(line) +
                          "'");
      const long long count = detail::parse_integer(fields[1], path.string());
      if (count < 0) throw FormatError(path.string() + ": negative count: '" + std::string(line) + "'");
      if (!unigrams.emplace(std::string(fields[0]), static_cast<std::uint64_t>(count)).second)
        throw FormatError(path.string() + ": duplicate unigram: " + std::string(fields[0]));
    } else if (section == Section::Bigrams) {
      if (fields.size() != 3)
        throw FormatError(path.string() + ": bigram row needs 3 fields: '" + std::string(line) +
                          "'");
      const long long count = detail::parse_integer(fields[2], path.string());
      if (count < 0) throw FormatError(path.string() + ": negative count: '" + std::string(line) + "'");
      const std::string key = bigram_key(std::string(fields[0]), std::string(fields[1]));
      if (!bigrams.emplace(key, static_cast<std::uint64_t>(count)).second)
        throw FormatError(path.string() + ": duplicate bigram: '" + std::string(line) + "'");
    } else {
      throw FormatError(path.string() + ": row before any section marker: '" + std::string(line) +
                        "'");
    }
  }
  return BigramTable(std::move(unigrams), std::move(bigrams));
}

std::uint64_t BigramTable::unigram_count(const std::string& word) const {
  const auto it = unigram_counts_.find(word);
  return it == unigram_counts_.end() ? 0 : it->second;
}

std::uint64_t BigramTable::bigram_count(const std::string& adjective,
                                        const std::string& noun) const {
  const auto it = bigram_counts_.find(bigram_key(adjective, noun));
  return it == bigram_counts_.end() ? 0 : it->second;
}

ModifierCooc::ModifierCooc(
    std::unordered_map<std::string, std::vector<std::pair<std::string, std::uint64_t>>> by_noun)
    : by_noun_(std::move(by_noun)) {}

ModifierCooc ModifierCooc::load(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  std::unordered_map<std::string, std::vector<std::pair<std::string, std::uint64_t>>> by_noun;
  for (const auto& line : detail::data_lines(text)) {
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 3)
      throw FormatError(path.string() + ": expected 'noun\\tadjective\\tcount': '" +
                        std::string(line) + "'");
    const long long count = detail::parse_integer(fields[2], path.string());
    if (count < 0) throw FormatError(path.string() + ": negative count: '" + std::string(line) + "'");
    auto& mods = by_noun[std::string(fields[0])];
    const std::string adjective(fields[1]);
    for (const auto& [existing, _] : mods)
      if (existing == adjective)
        throw FormatError(path.string() + ": duplicate pair: '" + std::string(line) + "'");
    mods.emplace_back(adjective, static_cast<std::uint64_t>(count));
  }
  return ModifierCooc(std::move(by_noun));
}

bool ModifierCooc::has_noun(const std::string& noun) const { return by_noun_.count(noun) > 0; }

const std::vector<std::pair<std::string, std::uint64_t>>& ModifierCooc::modifiers(
    const std::string& noun) const {
  const auto it = by_noun_.find(noun);
  if (it == by_noun_.end()) throw ContractError("noun has no co-occurrence entry: " + noun);
  return it->second;
}

std::vector<std::string> ModifierCooc::nouns() const {
  std::vector<std::string> out;
  out.reserve(by_noun_.size());
  for (const auto& [noun, _] : by_noun_) out.push_back(noun);
  std::sort(out.begin(), out.end());
  return out;
}

Ranking lm_rank(const BigramTable& table, const std::string& noun,
                const std::vector<std::string>& candidates, std::string query_id) {
  if (candidates.empty()) throw ContractError("lm_rank: empty candidate set");
  const double noun_count = static_cast<double>(table.unigram_count(noun));
  const double total = static_cast<double>(table.total_unigrams());
  std::vector<ScoredLabel> items;
  items.reserve(candidates.size());
  for (const auto& adjective : candidates) {
    const auto bigram = table.bigram_count(adjective, noun);
    double score;
    if (bigram > 0) {
      score = static_cast<double>(bigram) / noun_count;
    } else {
      score = total > 0.0
                  ? kStupidBackoffAlpha * static_cast<double>(table.unigram_count(adjective)) / total
                  : 0.0;
    }
    items.push_back({adjective, score});
  }
  return make_ranking(std::move(query_id), std::move(items));
}

Ranking sp_rank(const ModifierCooc& cooc, const EmbeddingSpace& space, const std::string& noun,
                const std::vector<std::string>& candidates, std::uint64_t threshold,
                std::string query_id) {
  if (candidates.empty()) throw ContractError("sp_rank: empty candidate set");
  const auto& mods = cooc.modifiers(noun);  // throws ContractError when absent
  Eigen::VectorXd prototype = Eigen::VectorXd::Zero(space.dim());
  std::size_t qualifying = 0;
  for (const auto& [adjective, count] : mods) {
    if (count <= threshold) continue;
    if (!space.contains(adjective))
      throw ContractError("sp_rank: prototype adjective not in space: " + adjective);
    const Eigen::VectorXd v = space.vector(adjective);
    const double norm = v.norm();
    if (norm == 0.0) throw NumericError("sp_rank: zero-norm prototype constituent: " + adjective);
    prototype += v / norm;
    ++qualifying;
  }
  if (qualifying == 0) throw NoPrototypeError("no adjective modifies '" + noun + "' often enough");
  prototype /= static_cast<double>(qualifying);

  std::vector<ScoredLabel> items;
  items.reserve(candidates.size());
  for (const auto& adjective : candidates) {
    if (!space.contains(adjective))
      throw ContractError("sp_rank: candidate not in space: " + adjective);
    items.push_back({adjective, cosine(space.vector(adjective), prototype)});
  }
  return make_ranking(std::move(query_id), std::move(items));
}

Ranking vlm_rank(const Ranking& a, const Ranking& b, std::string query_id) {
  if (a.items.size() != b.items.size())
    throw ContractError("vlm_rank: rankings cover different candidate sets");
  std::vector<ScoredLabel> items;
  items.reserve(a.items.size());
  for (const auto& item : a.items) {
    const int rank_a = a.rank_of(item.label);
    const int rank_b = b.rank_of(item.label);
    if (rank_b == 0)
      throw ContractError("vlm_rank: rankings cover different candidate sets: " + item.label);
    items.push_back({item.label, -0.5 * static_cast<double>(rank_a + rank_b)});
  }
  return make_ranking(std::move(query_id), std::move(items));
}

Ranking annotate_direct(const ProjectionModel& model, const EmbeddingSpace& retrieval,
                        const Eigen::VectorXd& image, int k, std::optional<Pos> pos_filter,
                        const LabelSet* restrict_to, std::string query_id) {
  const Eigen::VectorXd projected = project(model, image);
  return nearest(retrieval, projected, k, pos_filter, restrict_to, std::move(query_id));
}

DecAnnotation annotate_dec(const ProjectionModel& model, const DecompositionModel& dec,
                           const EmbeddingSpace& word_space, const Eigen::VectorXd& image,
                           int k_adjectives, int k_nouns, const LabelSet* adjective_pool,
                           const LabelSet* noun_pool, std::string query_id) {
  const Eigen::VectorXd projected = project(model, image);
  if (projected.size() != dec.dim())
    throw ContractError("annotate_dec: projection output does not match decomposition input");
  const auto parts = dec.decompose(projected);

  const bool tagged = word_space.has_pos_tags();
  if (!tagged && adjective_pool == nullptr)
    throw ContractError("annotate_dec: adjective purity needs tags or a restriction set");
  if (!tagged && noun_pool == nullptr)
    throw ContractError("annotate_dec: noun purity needs tags or a restriction set");

  DecAnnotation out;
  out.adjectives = nearest(word_space, parts.adjective, k_adjectives,
                           tagged ? std::optional<Pos>(Pos::Adj) : std::nullopt, adjective_pool,
                           query_id);
  out.nouns = nearest(word_space, parts.noun, k_nouns,
                      tagged ? std::optional<Pos>(Pos::Noun) : std::nullopt, noun_pool,
                      std::move(query_id));
  return out;
}

}  // namespace visphrase
