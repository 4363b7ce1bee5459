#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace visphrase {

inline constexpr std::string_view kLibraryVersion = "0.1.0";

enum class Pos { Adj, Noun, Other };

Pos parse_pos(std::string_view tag);
std::string_view pos_name(Pos pos);

using LabelSet = std::unordered_set<std::string>;

struct ScoredLabel {
  std::string label;
  double score = 0.0;
};

// Scored candidate labels for one query. Items are sorted by score
// descending; equal scores are ordered by ascending label so output is
// identical across platforms.
struct Ranking {
  std::string query_id;
  std::vector<ScoredLabel> items;

  // 1-based rank of `label`, 0 if absent.
  int rank_of(const std::string& label) const;
  bool contains(const std::string& label) const { return rank_of(label) > 0; }
};

// Sorts items into ranking order (score desc, label asc) and verifies
// label uniqueness.
Ranking make_ranking(std::string query_id, std::vector<ScoredLabel> items);

}  // namespace visphrase
