#include "visphrase/types.hpp"

#include <algorithm>

#include "visphrase/error.hpp"

namespace visphrase {

Pos parse_pos(std::string_view tag) {
  if (tag == "ADJ") return Pos::Adj;
  if (tag == "NOUN") return Pos::Noun;
  if (tag == "OTHER") return Pos::Other;
  throw FormatError("unknown part-of-speech tag: '" + std::string(tag) + "'");
}

std::string_view pos_name(Pos pos) {
  switch (pos) {
    case Pos::Adj: return "ADJ";
    case Pos::Noun: return "NOUN";
    case Pos::Other: return "OTHER";
  }
  return "OTHER";
}

int Ranking::rank_of(const std::string& label) const {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].label == label) return static_cast<int>(i) + 1;
  }
  return 0;
}

Ranking make_ranking(std::string query_id, std::vector<ScoredLabel> items) {
  std::sort(items.begin(), items.end(), [](const ScoredLabel& a, const ScoredLabel& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.label < b.label;
  });
  std::unordered_set<std::string> seen;
  for (const ScoredLabel& item : items) {
    if (!seen.insert(item.label).second) {
      throw ContractError("duplicate label in ranking: '" + item.label + "'");
    }
  }
  return Ranking{std::move(query_id), std::move(items)};
}

}  // namespace visphrase
