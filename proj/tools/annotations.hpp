#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "visphrase/types.hpp"

namespace visphrase::tools {

// Annotation rankings produced by one labeling run. Either list may be
// empty (adjective-only or noun-only runs) but not both; the two lists
// are index-aligned when both are non-empty.
struct AnnotationSet {
  std::vector<Ranking> adjectives;
  std::vector<Ranking> nouns;
};

// TSV rows "image_id\tkind\trank\tlabel\tscore" with kind adjective or
// noun, ranks contiguous from 1 per image and kind. `header` lines are
// written verbatim before the data (comments carrying provenance).
void save_annotations(const AnnotationSet& set, const std::string& header,
                      const std::filesystem::path& path);
AnnotationSet load_annotations(const std::filesystem::path& path);

}  // namespace visphrase::tools
