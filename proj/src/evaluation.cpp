#include "visphrase/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "parse.hpp"
#include "visphrase/error.hpp"
#include "visphrase/linalg.hpp"

namespace visphrase {
namespace {

// Pairs each ranking with its gold annotation; both sides must cover
// exactly the same image ids.
std::vector<const GoldAnnotation*> align(const std::vector<Ranking>& rankings,
                                         const std::vector<GoldAnnotation>& gold) {
  std::unordered_map<std::string, const GoldAnnotation*> by_id;
  for (const auto& g : gold) {
    if (!by_id.emplace(g.image_id, &g).second)
      throw AlignmentError("duplicate gold image id", {g.image_id});
  }
  std::vector<std::string> offenders;
  std::vector<const GoldAnnotation*> aligned;
  aligned.reserve(rankings.size());
  std::unordered_map<std::string, int> seen;
  for (const auto& r : rankings) {
    ++seen[r.query_id];
    const auto it = by_id.find(r.query_id);
    if (it == by_id.end()) {
      offenders.push_back(r.query_id);
      continue;
    }
    aligned.push_back(it->second);
  }
  for (const auto& [id, count] : seen)
    if (count > 1) offenders.push_back(id);
  for (const auto& g : gold)
    if (seen.find(g.image_id) == seen.end()) offenders.push_back(g.image_id);
  if (!offenders.empty()) {
    std::sort(offenders.begin(), offenders.end());
    throw AlignmentError("rankings and gold annotations do not align", offenders);
  }
  return aligned;
}

void check_ks(const std::vector<int>& ks) {
  if (ks.empty()) throw ContractError("empty k list");
  for (int k : ks)
    if (k < 1) throw ContractError("k must be >= 1");
}

double spearman_or_pearson(const std::vector<double>& xs, const std::vector<double>& ys,
                           CorrelationKind kind);

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  const double mean_x = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
  const double mean_y = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mean_x;
    const double dy = ys[i] - mean_y;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericError("correlation undefined: constant input");
  return sxy / std::sqrt(sxx * syy);
}

// Average ranks, ties sharing the mean of their positions.
std::vector<double> fractional_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = shared;
    i = j + 1;
  }
  return ranks;
}

double spearman_or_pearson(const std::vector<double>& xs, const std::vector<double>& ys,
                           CorrelationKind kind) {
  if (kind == CorrelationKind::Pearson) return pearson(xs, ys);
  return pearson(fractional_ranks(xs), fractional_ranks(ys));
}

}  // namespace

std::vector<GoldAnnotation> load_gold(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  std::vector<GoldAnnotation> out;
  std::unordered_map<std::string, int> seen;
  for (const auto& line : detail::data_lines(text)) {
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 3)
      throw FormatError(path.string() + ": expected 'image_id\\tnoun\\tadjectives': '" +
                        std::string(line) + "'");
    GoldAnnotation g;
    g.image_id = std::string(fields[0]);
    if (g.image_id.empty()) throw FormatError(path.string() + ": empty image id");
    if (++seen[g.image_id] > 1)
      throw FormatError(path.string() + ": duplicate image id: " + g.image_id);
    if (!fields[1].empty() && fields[1] != "-") g.gold_noun = std::string(fields[1]);
    for (const auto& adj : detail::split(fields[2], ',')) {
      if (adj.empty())
        throw FormatError(path.string() + ": empty adjective for image " + g.image_id);
      g.gold_adjectives.insert(std::string(adj));
    }
    if (g.gold_adjectives.empty())
      throw FormatError(path.string() + ": no gold adjectives for image " + g.image_id);
    out.push_back(std::move(g));
  }
  if (out.empty()) throw FormatError(path.string() + ": no gold annotations");
  return out;
}

std::map<int, double> hit_at_k(const std::vector<Ranking>& rankings,
                               const std::vector<GoldAnnotation>& gold,
                               const std::vector<int>& ks) {
  check_ks(ks);
  if (rankings.empty()) throw ContractError("no rankings to evaluate");
  const auto aligned = align(rankings, gold);
  std::map<int, double> out;
  for (int k : ks) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < rankings.size(); ++i) {
      const auto& items = rankings[i].items;
      const std::size_t depth = std::min<std::size_t>(static_cast<std::size_t>(k), items.size());
      bool hit = false;
      for (std::size_t r = 0; r < depth && !hit; ++r)
        hit = aligned[i]->gold_adjectives.count(items[r].label) > 0;
      if (hit) ++hits;
    }
    out[k] = 100.0 * static_cast<double>(hits) / static_cast<double>(rankings.size());
  }
  return out;
}

std::map<int, double> recall_at_k(const std::vector<Ranking>& rankings,
                                  const std::vector<GoldAnnotation>& gold,
                                  const std::vector<int>& ks) {
  check_ks(ks);
  if (rankings.empty()) throw ContractError("no rankings to evaluate");
  const auto aligned = align(rankings, gold);
  std::map<int, double> out;
  for (int k : ks) {
    double total = 0.0;
    for (std::size_t i = 0; i < rankings.size(); ++i) {
      const auto& items = rankings[i].items;
      const std::size_t depth = std::min<std::size_t>(static_cast<std::size_t>(k), items.size());
      std::size_t found = 0;
      for (std::size_t r = 0; r < depth; ++r)
        if (aligned[i]->gold_adjectives.count(items[r].label) > 0) ++found;
      total += static_cast<double>(found) / static_cast<double>(aligned[i]->gold_adjectives.size());
    }
    out[k] = 100.0 * total / static_cast<double>(rankings.size());
  }
  return out;
}

double auc(const std::vector<std::pair<std::string, double>>& scores, const LabelSet& positives) {
  std::vector<double> pos, neg;
  for (const auto& [id, score] : scores) {
    if (!std::isfinite(score)) throw NumericError("auc: non-finite score for " + id);
    (positives.count(id) > 0 ? pos : neg).push_back(score);
  }
  if (pos.empty() || neg.empty())
    throw NumericError("auc undefined: needs at least one positive and one negative");
  // Sort negatives once; each positive contributes (#neg below) plus
  // half of (#neg tied), found by binary search.
  std::sort(neg.begin(), neg.end());
  double favorable = 0.0;
  for (double p : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    const auto hi = std::upper_bound(neg.begin(), neg.end(), p);
    favorable += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return favorable / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double mean_attribute_rank(const std::vector<Ranking>& rankings, const std::string& attribute) {
  if (rankings.empty()) throw ContractError("no rankings");
  double total = 0.0;
  for (const auto& r : rankings) {
    const int rank = r.rank_of(attribute);
    if (rank == 0)
      throw ContractError("attribute absent from ranking '" + r.query_id + "': " + attribute);
    total += static_cast<double>(rank);
  }
  return total / static_cast<double>(rankings.size());
}

StructureCorrelation structure_correlation(const EmbeddingSpace& space_a,
                                           const EmbeddingSpace& space_b,
                                           const std::vector<std::string>& shared,
                                           CorrelationKind kind, int permutations,
                                           std::uint64_t seed) {
  if (shared.size() < 3) throw ContractError("structure correlation needs >= 3 shared labels");
  if (permutations < 1) throw ContractError("permutation count must be >= 1");
  const std::size_t n = shared.size();
  std::vector<Eigen::VectorXd> va, vb;
  va.reserve(n);
  vb.reserve(n);
  for (const auto& label : shared) {
    va.push_back(space_a.vector(label));
    vb.push_back(space_b.vector(label));
  }

  const auto pair_cosines = [&](const std::vector<Eigen::VectorXd>& vs,
                                const std::vector<std::size_t>& order) {
    std::vector<double> out;
    out.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) out.push_back(cosine(vs[order[i]], vs[order[j]]));
    return out;
  };

  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  const std::vector<double> cos_a = pair_cosines(va, identity);
  const std::vector<double> cos_b = pair_cosines(vb, identity);

  StructureCorrelation result;
  result.rho = spearman_or_pearson(cos_a, cos_b, kind);
  result.permutations = permutations;

  // Permute space_b's label assignment: the null keeps each space's
  // internal geometry but breaks the cross-space pairing.
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order = identity;
  int at_least = 0;
  for (int p = 0; p < permutations; ++p) {
    std::shuffle(order.begin(), order.end(), rng);
    const double rho_perm = spearman_or_pearson(cos_a, pair_cosines(vb, order), kind);
    if (rho_perm >= result.rho) ++at_least;
  }
  result.p_value =
      (1.0 + static_cast<double>(at_least)) / (1.0 + static_cast<double>(permutations));
  return result;
}

ConcretenessResult concreteness_score(
    const Ranking& ranking, const std::unordered_map<std::string, double>& noun_concreteness,
    const ModifierCooc& cooc, int top_n) {
  if (top_n < 1) throw ContractError("concreteness: top_n must be >= 1");
  if (ranking.items.empty()) throw ContractError("concreteness: empty ranking");
  ConcretenessResult result;
  double total = 0.0;
  std::size_t used = 0;
  const std::size_t depth = std::min<std::size_t>(static_cast<std::size_t>(top_n),
                                                  ranking.items.size());
  // Adjective concreteness: weighted mean over nouns it modifies, found
  // by scanning the noun-keyed table.
  for (std::size_t i = 0; i < depth; ++i) {
    const std::string& adjective = ranking.items[i].label;
    double weighted = 0.0;
    double weight = 0.0;
    for (const auto& noun : cooc.nouns()) {
      const auto conc = noun_concreteness.find(noun);
      if (conc == noun_concreteness.end()) continue;
      for (const auto& [mod, count] : cooc.modifiers(noun)) {
        if (mod == adjective && count > 0) {
          weighted += static_cast<double>(count) * conc->second;
          weight += static_cast<double>(count);
        }
      }
    }
    if (weight == 0.0) {
      result.excluded.push_back(adjective);
      continue;
    }
    total += weighted / weight;
    ++used;
  }
  if (used == 0) return result;  // defined stays false
  result.score = total / static_cast<double>(used);
  result.defined = true;
  return result;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["per_k"] = nlohmann::json::object();
  for (const auto& [k, m] : per_k) {
    j["per_k"][std::to_string(k)] = {{"hit_percent", m.hit_percent},
                                     {"recall_percent", m.recall_percent}};
  }
  j["per_attribute_auc"] = nlohmann::json::object();
  for (const auto& [attribute, value] : per_attribute_auc) j["per_attribute_auc"][attribute] = value;
  j["metadata"] = metadata;
  return j;
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << "k      hit%       recall%\n";
  for (const auto& [k, m] : per_k) {
    std::string ks = std::to_string(k);
    ks.resize(6, ' ');
    std::string hit = linalg::format_double(m.hit_percent);
    hit.resize(std::max<std::size_t>(hit.size(), 10), ' ');
    out << ks << ' ' << hit << ' ' << linalg::format_double(m.recall_percent) << '\n';
  }
  if (!per_attribute_auc.empty()) {
    out << "\nattribute AUC\n";
    std::size_t width = 0;
    for (const auto& [attribute, _] : per_attribute_auc)
      width = std::max(width, attribute.size());
    for (const auto& [attribute, value] : per_attribute_auc) {
      std::string name = attribute;
      name.resize(width + 1, ' ');
      out << name << ' ' << linalg::format_double(value) << '\n';
    }
  }
  return out.str();
}

}  // namespace visphrase
