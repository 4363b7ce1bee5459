#include "annotations.hpp"

#include <fstream>
#include <map>

#include "../src/parse.hpp"
#include "visphrase/error.hpp"
#include "visphrase/linalg.hpp"

namespace visphrase::tools {

namespace {

void append_ranking(std::string& out, const Ranking& ranking, const char* kind) {
  int rank = 1;
  for (const auto& item : ranking.items) {
    out += ranking.query_id;
    out += '\t';
    out += kind;
    out += '\t';
    out += std::to_string(rank++);
    out += '\t';
    out += item.label;
    out += '\t';
    out += linalg::format_double(item.score);
    out += '\n';
  }
}

}  // namespace

void save_annotations(const AnnotationSet& set, const std::string& header,
                      const std::filesystem::path& path) {
  if (!set.nouns.empty() && !set.adjectives.empty() &&
      set.nouns.size() != set.adjectives.size()) {
    throw ContractError("save_annotations: adjective and noun rankings must align");
  }
  if (set.nouns.empty() && set.adjectives.empty()) {
    throw ContractError("save_annotations: nothing to write");
  }
  std::string out = header;
  const std::size_t count = std::max(set.adjectives.size(), set.nouns.size());
  for (std::size_t i = 0; i < count; ++i) {
    if (i < set.adjectives.size()) append_ranking(out, set.adjectives[i], "adjective");
    if (i < set.nouns.size()) append_ranking(out, set.nouns[i], "noun");
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw FormatError("cannot write file: " + path.string());
  file << out;
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  // (image, kind) -> items in file order, ranks verified contiguous.
  struct Group {
    std::vector<ScoredLabel> items;
    int next_rank = 1;
  };
  std::vector<std::string> image_order;
  std::map<std::pair<std::string, std::string>, Group> groups;
  bool any_adjective = false, any_noun = false;
  for (const auto line : detail::data_lines(text)) {
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 5) {
      throw FormatError(path.string() + ": rows are 'image_id\\tkind\\trank\\tlabel\\tscore'");
    }
    const std::string image(fields[0]);
    const std::string kind(fields[1]);
    if (kind != "adjective" && kind != "noun") {
      throw FormatError(path.string() + ": unknown kind '" + kind + "'");
    }
    (kind == "adjective" ? any_adjective : any_noun) = true;
    const long long rank = detail::parse_integer(fields[2], path.string());
    const double score = detail::parse_double(fields[4], path.string());
    const bool seen = groups.count({image, "adjective"}) > 0 || groups.count({image, "noun"}) > 0;
    if (!seen) image_order.push_back(image);
    auto& group = groups[{image, kind}];
    if (rank != group.next_rank) {
      throw FormatError(path.string() + ": ranks for " + image + "/" + kind +
                        " must be contiguous from 1");
    }
    ++group.next_rank;
    group.items.push_back({std::string(fields[3]), score});
  }
  if (image_order.empty()) {
    throw FormatError(path.string() + ": no rankings found");
  }

  // The stored order is authoritative; re-sorting must agree, or the
  // file's scores and ranks contradict each other.
  const auto rebuild = [&](const std::string& image, const std::string& kind) {
    auto it = groups.find({image, kind});
    if (it == groups.end()) {
      throw FormatError(path.string() + ": image " + image + " lacks a " + kind + " ranking");
    }
    Ranking r = make_ranking(image, it->second.items);
    for (std::size_t i = 0; i < r.items.size(); ++i) {
      if (r.items[i].label != it->second.items[i].label) {
        throw FormatError(path.string() + ": stored ranks disagree with scores for " + image);
      }
    }
    return r;
  };

  AnnotationSet set;
  for (const auto& image : image_order) {
    if (any_adjective) set.adjectives.push_back(rebuild(image, "adjective"));
    if (any_noun) set.nouns.push_back(rebuild(image, "noun"));
  }
  return set;
}

}  // namespace visphrase::tools
