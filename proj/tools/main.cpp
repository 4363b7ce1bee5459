#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "../src/parse.hpp"
#include "annotations.hpp"
#include "config.hpp"
#include "fixtures.hpp"
#include "json.hpp"
#include "visphrase/attribute_repr.hpp"
#include "visphrase/decomposition.hpp"
#include "visphrase/embedding.hpp"
#include "visphrase/error.hpp"
#include "visphrase/evaluation.hpp"
#include "visphrase/labeling.hpp"
#include "visphrase/linalg.hpp"
#include "visphrase/projection.hpp"
#include "visphrase/types.hpp"

namespace {

using visphrase::tools::AnnotationSet;
using visphrase::tools::CliError;
using visphrase::tools::Config;
using visphrase::tools::load_annotations;
using visphrase::tools::save_annotations;
namespace vp = visphrase;

struct CommandContext {
  Config cfg;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  std::string hash;

  std::string comment() const {
    return "# config_hash=" + hash + "\n# version=" + std::string(vp::kLibraryVersion) + "\n";
  }
  nlohmann::json meta() const {
    return {{"config_hash", hash}, {"version", std::string(vp::kLibraryVersion)}};
  }
};

CommandContext make_context(const std::string& config_path, const std::vector<std::string>& sets) {
  Config cfg = Config::load(config_path);
  for (const auto& s : sets) cfg.apply_override(s);
  CommandContext ctx{std::move(cfg)};
  const long long seed = ctx.cfg.get_integer("run", "seed");
  if (seed < 0) throw CliError(2, "config error: run.seed must be non-negative");
  ctx.seed = static_cast<std::uint64_t>(seed);
  ctx.output_dir = ctx.cfg.get_path("paths", "output_dir");
  std::filesystem::create_directories(ctx.output_dir);
  ctx.hash = ctx.cfg.hash();
  return ctx;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError(2, "config error: cannot write " + path.string());
  out << content;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// Output paths come from [paths] when present, else default into
// output_dir under a fixed name.
std::filesystem::path out_path(const CommandContext& ctx, const std::string& key,
                               const std::string& fallback_name) {
  if (ctx.cfg.has("paths", key)) return ctx.cfg.get_path("paths", key);
  return ctx.output_dir / fallback_name;
}

vp::EmbeddingSpace load_words(const Config& cfg) {
  auto space =
      vp::load_space(cfg.get_input_path("paths", "word_space"), vp::SpaceFormat::Word2VecText);
  if (cfg.has("paths", "word_pos")) {
    space.set_pos_tags(vp::load_pos_sidecar(cfg.get_input_path("paths", "word_pos")));
  }
  if (cfg.has("paths", "word_freq")) {
    space.set_frequency_ranks(vp::load_frequency_sidecar(cfg.get_input_path("paths", "word_freq")));
  }
  return space;
}

vp::EmbeddingSpace load_images(const Config& cfg, const std::string& key) {
  return vp::load_space(cfg.get_input_path("paths", key), vp::SpaceFormat::Tsv);
}

// Rows "item_id\tlabel", order-preserving.
std::vector<std::pair<std::string, std::string>> load_pairs_file(
    const std::filesystem::path& path) {
  const std::string text = vp::detail::read_file(path);
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto line : vp::detail::data_lines(text)) {
    const auto fields = vp::detail::split(line, '\t');
    if (fields.size() != 2) {
      throw vp::FormatError(path.string() + ": rows are 'item_id\\tlabel'");
    }
    out.emplace_back(std::string(fields[0]), std::string(fields[1]));
  }
  if (out.empty()) throw vp::FormatError(path.string() + ": no pairs found");
  return out;
}

std::unordered_map<std::string, double> load_score_file(const std::filesystem::path& path) {
  const std::string text = vp::detail::read_file(path);
  std::unordered_map<std::string, double> out;
  for (const auto line : vp::detail::data_lines(text)) {
    const auto fields = vp::detail::split(line, '\t');
    if (fields.size() != 2) {
      throw vp::FormatError(path.string() + ": rows are 'label\\tscore'");
    }
    if (!out.emplace(std::string(fields[0]), vp::detail::parse_double(fields[1], path.string()))
             .second) {
      throw vp::FormatError(path.string() + ": duplicate label '" + std::string(fields[0]) + "'");
    }
  }
  return out;
}

vp::PairedDataset build_dataset(const vp::EmbeddingSpace& visuals,
                                const std::vector<std::pair<std::string, std::string>>& pairs,
                                const vp::EmbeddingSpace& words) {
  std::vector<Eigen::VectorXd> sources;
  std::vector<std::string> labels;
  sources.reserve(pairs.size());
  for (const auto& [id, label] : pairs) {
    if (!visuals.contains(id)) {
      throw CliError(3, "data mismatch: pair item '" + id + "' is missing from the image file");
    }
    sources.push_back(visuals.vector(id));
    labels.push_back(label);
  }
  try {
    return vp::PairedDataset(std::move(sources), std::move(labels), words);
  } catch (const vp::ContractError& e) {
    throw CliError(3, std::string("data mismatch: ") + e.what());
  }
}

vp::ProjectionModel train_one_projection(const CommandContext& ctx,
                                         const vp::PairedDataset& data) {
  const auto& cfg = ctx.cfg;
  const std::string method = cfg.get_string_or("projection", "method", "ridge");
  if (method == "ridge") {
    vp::CvOptions cv;
    cv.grid = cfg.get_double_list_or("projection", "grid", {});
    cv.folds = static_cast<int>(cfg.get_integer_or("projection", "folds", 5));
    if (cv.folds < 2) throw CliError(2, "config error: projection.folds must be at least 2");
    cv.seed = ctx.seed;
    return vp::train_ridge(data, cfg.get_auto_or_double("projection", "lambda"), cv);
  }
  if (method == "ncca") {
    vp::NccaOptions opt;
    opt.power_grid = cfg.get_double_list_or("projection", "power_grid", {});
    opt.holdout_fraction = cfg.get_double_or("projection", "holdout_fraction", 0.2);
    opt.seed = ctx.seed;
    opt.covariance_epsilon_scale =
        cfg.get_double_or("projection", "covariance_epsilon_scale", 1e-8);
    return vp::train_ncca(data, cfg.get_auto_or_double("projection", "power"), opt);
  }
  throw CliError(2, "config error: projection.method must be ridge or ncca, got '" + method + "'");
}

nlohmann::json model_log_entry(const vp::ProjectionModel& model, const std::string& file,
                               const nlohmann::json& excluded) {
  nlohmann::json entry;
  entry["file"] = file;
  entry["excluded"] = excluded;
  entry["pairs"] = model.info().pair_count;
  entry["grid"] = model.info().grid;
  entry["grid_scores"] = model.info().grid_scores;
  entry["chosen"] = model.info().chosen;
  if (model.is_ridge()) {
    entry["pseudoinverse_fallback"] = model.ridge().pseudoinverse_fallback;
  }
  return entry;
}

void save_model_with_meta(const vp::ProjectionModel& model, const CommandContext& ctx,
                          const std::filesystem::path& path) {
  nlohmann::json j = model.to_json();
  j["metadata"] = ctx.meta();
  write_json_file(path, j);
}

int cmd_train_proj(const CommandContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto words = load_words(cfg);
  const auto visuals = load_images(cfg, "train_images");
  const auto pairs = load_pairs_file(cfg.get_input_path("paths", "pairs"));
  const auto data = build_dataset(visuals, pairs, words);

  nlohmann::json log;
  log["metadata"] = ctx.meta();
  log["method"] = cfg.get_string_or("projection", "method", "ridge");
  log["models"] = nlohmann::json::array();

  if (cfg.get_bool_or("projection", "leave_one_out", false)) {
    std::vector<std::string> labels = data.target_labels();
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    for (const auto& excluded : labels) {
      std::vector<std::size_t> keep;
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.target_labels()[i] != excluded) keep.push_back(i);
      }
      if (keep.empty()) {
        throw CliError(3, "data mismatch: excluding '" + excluded + "' leaves no training pairs");
      }
      const auto model = train_one_projection(ctx, data.subset(keep));
      const std::string name = "model_leave_" + excluded + ".json";
      save_model_with_meta(model, ctx, ctx.output_dir / name);
      log["models"].push_back(model_log_entry(model, name, excluded));
    }
  } else {
    const auto model = train_one_projection(ctx, data);
    const auto path = out_path(ctx, "model", "model.json");
    save_model_with_meta(model, ctx, path);
    log["models"].push_back(model_log_entry(model, path.filename().string(), nullptr));
  }
  write_json_file(ctx.output_dir / "training_log.json", log);
  std::cout << "trained " << log["models"].size() << " projection model(s)\n";
  return 0;
}

int cmd_train_dec(const CommandContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto words = load_words(cfg);
  const auto phrases =
      vp::load_space(cfg.get_input_path("paths", "phrase_space"), vp::SpaceFormat::Word2VecText);
  const auto triples = vp::load_triples(cfg.get_input_path("paths", "triples"));

  const long long cap = cfg.get_integer_or("decomposition", "balance_cap", 100);
  if (cap < 0) throw CliError(2, "config error: decomposition.balance_cap must be >= 0");

  try {
    vp::PhraseTrainingSet set(triples, phrases, words);
    const vp::PhraseTrainingSet used =
        cap > 0 ? vp::balance_training(set, static_cast<std::size_t>(cap)) : std::move(set);
    const auto model = vp::train_dec(used, cfg.get_auto_or_double("decomposition", "lambda"),
                                     cfg.get_double_list_or("decomposition", "grid", {}));

    nlohmann::json j = model.to_json();
    j["metadata"] = ctx.meta();
    write_json_file(out_path(ctx, "dec_model", "dec_model.json"), j);

    nlohmann::json log;
    log["metadata"] = ctx.meta();
    log["triples_loaded"] = triples.size();
    log["triples_used"] = used.size();
    log["balance_cap"] = cap;
    log["lambda"] = model.lambda();
    log["grid"] = model.grid();
    log["grid_scores"] = model.grid_scores();
    write_json_file(ctx.output_dir / "dec_training_log.json", log);
    std::cout << "trained decomposition on " << used.size() << " triples\n";
    return 0;
  } catch (const vp::ContractError& e) {
    throw CliError(3, std::string("data mismatch: ") + e.what());
  }
}

vp::ProjectionModel load_model_checked(const CommandContext& ctx,
                                       const vp::EmbeddingSpace& images) {
  const auto model = vp::load_projection_model(ctx.cfg.get_input_path("paths", "model"));
  if (model.source_dim() != images.dim()) {
    throw CliError(3, "data mismatch: model expects source dimension " +
                          std::to_string(model.source_dim()) + " but images have " +
                          std::to_string(images.dim()));
  }
  return model;
}

vp::DecompositionModel load_dec_checked(const CommandContext& ctx,
                                        const vp::ProjectionModel& model,
                                        const vp::EmbeddingSpace& words) {
  const auto dec = vp::load_decomposition_model(ctx.cfg.get_input_path("paths", "dec_model"));
  if (dec.dim() != model.output_dim() || dec.dim() != words.dim()) {
    throw CliError(3, "data mismatch: decomposition expects dimension " +
                          std::to_string(dec.dim()) + " but the projection outputs " +
                          std::to_string(model.output_dim()) + " and the word space has " +
                          std::to_string(words.dim()));
  }
  return dec;
}

void truncate_ranking(vp::Ranking& r, int k) {
  if (static_cast<int>(r.items.size()) > k) r.items.resize(static_cast<std::size_t>(k));
}

int cmd_annotate(const CommandContext& ctx) {
  const auto& cfg = ctx.cfg;
  const std::string mode = cfg.get_string_or("annotate", "mode", "dir");
  if (mode != "dir" && mode != "dec" && mode != "lm" && mode != "sp" && mode != "vlm") {
    throw CliError(2, "config error: annotate.mode must be dir, dec, lm, sp or vlm");
  }
  const int k = static_cast<int>(cfg.get_integer_or("annotate", "k", 10));
  const int noun_k = static_cast<int>(cfg.get_integer_or("annotate", "noun_k", k));
  if (k < 1 || noun_k < 1) throw CliError(2, "config error: annotate.k must be at least 1");
  const std::string pool = cfg.get_string_or("annotate", "pool", "adjectives");
  if (pool != "adjectives" && pool != "nouns") {
    throw CliError(2, "config error: annotate.pool must be adjectives or nouns");
  }
  const long long top_frequent = cfg.get_integer_or("annotate", "top_frequent", 0);
  if (top_frequent < 0) throw CliError(2, "config error: annotate.top_frequent must be >= 0");

  const auto words = load_words(cfg);
  const auto images = load_images(cfg, "test_images");
  const vp::Pos pool_pos = pool == "adjectives" ? vp::Pos::Adj : vp::Pos::Noun;
  const bool tagged = words.has_pos_tags();

  vp::LabelSet restrict_set;
  const vp::LabelSet* restrict_ptr = nullptr;
  if (top_frequent > 0) {
    if (!words.has_frequency_ranks()) {
      throw CliError(3, "data mismatch: annotate.top_frequent needs frequency ranks");
    }
    if (!tagged) {
      throw CliError(3, "data mismatch: annotate.top_frequent needs pos tags");
    }
    restrict_set = words.top_by_frequency(static_cast<std::size_t>(top_frequent), pool_pos);
    restrict_ptr = &restrict_set;
  }
  if (!tagged && restrict_ptr == nullptr) {
    throw CliError(3, "data mismatch: annotate needs pos tags or top_frequent to fix the pool");
  }
  const std::optional<vp::Pos> pos_filter =
      tagged ? std::optional<vp::Pos>(pool_pos) : std::nullopt;

  // Sorted candidate list for the text-only scorers and rank fusion.
  std::vector<std::string> candidates;
  if (restrict_ptr != nullptr) {
    candidates.assign(restrict_set.begin(), restrict_set.end());
  } else {
    for (const auto& label : words.labels()) {
      if (*words.pos(label) == pool_pos) candidates.push_back(label);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  if (candidates.empty()) throw CliError(3, "data mismatch: the candidate pool is empty");

  // Gold object annotations drive the object-informed scorers.
  std::unordered_map<std::string, std::string> gold_noun;
  if (mode == "lm" || mode == "sp" || mode == "vlm") {
    for (const auto& g : vp::load_gold(cfg.get_input_path("paths", "gold"))) {
      if (g.gold_noun) gold_noun[g.image_id] = *g.gold_noun;
    }
  }
  const auto noun_for = [&](const std::string& id) -> const std::string& {
    auto it = gold_noun.find(id);
    if (it == gold_noun.end()) {
      throw CliError(3, "data mismatch: no gold noun for image '" + id + "'");
    }
    return it->second;
  };

  AnnotationSet set;
  std::string fallback_comments;
  try {
    if (mode == "dir" || mode == "dec" || mode == "vlm") {
      const auto model = load_model_checked(ctx, images);
      if (mode == "dec") {
        if (!tagged) throw CliError(3, "data mismatch: dec annotation needs pos tags");
        const auto dec = load_dec_checked(ctx, model, words);
        for (const auto& id : images.labels()) {
          auto ann = vp::annotate_dec(model, dec, words, images.vector(id), k, noun_k,
                                      restrict_ptr, nullptr, id);
          set.adjectives.push_back(std::move(ann.adjectives));
          set.nouns.push_back(std::move(ann.nouns));
        }
      } else {
        const auto retrieval = vp::retrieval_space(model, words);
        if (mode == "dir") {
          for (const auto& id : images.labels()) {
            auto r = vp::annotate_direct(model, retrieval, images.vector(id), k, pos_filter,
                                         restrict_ptr, id);
            (pool_pos == vp::Pos::Adj ? set.adjectives : set.nouns).push_back(std::move(r));
          }
        } else {  // vlm: equal-weight rank fusion of direct retrieval with lm
          const auto table = vp::BigramTable::load(cfg.get_input_path("paths", "bigrams"));
          const int full = static_cast<int>(candidates.size());
          for (const auto& id : images.labels()) {
            const auto dir_full = vp::annotate_direct(model, retrieval, images.vector(id), full,
                                                      pos_filter, restrict_ptr, id);
            const auto lm_full = vp::lm_rank(table, noun_for(id), candidates, id);
            auto fused = vp::vlm_rank(dir_full, lm_full, id);
            truncate_ranking(fused, k);
            set.adjectives.push_back(std::move(fused));
          }
        }
      }
    } else if (mode == "lm") {
      const auto table = vp::BigramTable::load(cfg.get_input_path("paths", "bigrams"));
      for (const auto& id : images.labels()) {
        auto r = vp::lm_rank(table, noun_for(id), candidates, id);
        truncate_ranking(r, k);
        set.adjectives.push_back(std::move(r));
      }
    } else {  // sp, falling back to lm per image when no prototype exists
      const auto cooc = vp::ModifierCooc::load(cfg.get_input_path("paths", "cooc"));
      const auto table = vp::BigramTable::load(cfg.get_input_path("paths", "bigrams"));
      const long long threshold = cfg.get_integer_or("annotate", "sp_threshold", 20);
      if (threshold < 0) throw CliError(2, "config error: annotate.sp_threshold must be >= 0");
      for (const auto& id : images.labels()) {
        const std::string& noun = noun_for(id);
        std::optional<vp::Ranking> r;
        std::string reason;
        if (!cooc.has_noun(noun)) {
          reason = "noun-unseen";
        } else {
          try {
            r = vp::sp_rank(cooc, words, noun, candidates,
                            static_cast<std::uint64_t>(threshold), id);
          } catch (const vp::NoPrototypeError&) {
            reason = "no-qualifying-adjective";
          }
        }
        if (!r) {
          r = vp::lm_rank(table, noun, candidates, id);
          fallback_comments += "# sp_fallback=" + id + "\t" + reason + "\n";
        }
        truncate_ranking(*r, k);
        set.adjectives.push_back(std::move(*r));
      }
    }
  } catch (const vp::ContractError& e) {
    throw CliError(3, std::string("data mismatch: ") + e.what());
  }

  const auto path = out_path(ctx, "annotations", "annotations.tsv");
  save_annotations(set, ctx.comment() + fallback_comments, path);
  std::cout << "annotated " << images.size() << " image(s) in mode " << mode << "\n";
  return 0;
}

int cmd_evaluate(const CommandContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto ks = cfg.get_int_list("evaluate", "ks");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < 1 || (i > 0 && ks[i] <= ks[i - 1])) {
      throw CliError(2, "config error: evaluate.ks must be strictly increasing and positive");
    }
  }
  const auto set = load_annotations(cfg.get_input_path("paths", "annotations"));
  const auto gold = vp::load_gold(cfg.get_input_path("paths", "gold"));

  nlohmann::json report;
  report["metadata"] = ctx.meta();
  std::string table;

  const auto metrics_for = [&](const std::vector<vp::Ranking>& rankings,
                               const std::vector<vp::GoldAnnotation>& truth) {
    vp::EvalReport rep;
    try {
      const auto hit = vp::hit_at_k(rankings, truth, ks);
      const auto recall = vp::recall_at_k(rankings, truth, ks);
      for (int k : ks) rep.per_k[k] = {hit.at(k), recall.at(k)};
    } catch (const vp::AlignmentError& e) {
      throw CliError(4, std::string("alignment error: ") + e.what());
    }
    rep.metadata["images"] = std::to_string(rankings.size());
    rep.metadata["config_hash"] = ctx.hash;
    rep.metadata["version"] = std::string(vp::kLibraryVersion);
    return rep;
  };

  if (!set.adjectives.empty()) {
    vp::EvalReport rep = metrics_for(set.adjectives, gold);
    nlohmann::json extra_mean_rank = nlohmann::json::object();

    const bool want_auc = cfg.get_bool_or("evaluate", "auc", false);
    const bool want_mean_rank = cfg.get_bool_or("evaluate", "mean_rank", false);
    if (want_auc || want_mean_rank) {
      // Both statistics need every image scored on one shared pool.
      vp::LabelSet shared;
      for (const auto& item : set.adjectives.front().items) shared.insert(item.label);
      for (const auto& r : set.adjectives) {
        if (r.items.size() != shared.size() ||
            !std::all_of(r.items.begin(), r.items.end(),
                         [&](const auto& item) { return shared.count(item.label) > 0; })) {
          throw CliError(3,
                         "data mismatch: per-attribute statistics need complete rankings over "
                         "one shared candidate set (annotate with k covering the whole pool)");
        }
      }
      std::vector<std::string> attributes;
      for (const auto& g : gold) {
        for (const auto& a : g.gold_adjectives) attributes.push_back(a);
      }
      std::sort(attributes.begin(), attributes.end());
      attributes.erase(std::unique(attributes.begin(), attributes.end()), attributes.end());

      for (const auto& attribute : attributes) {
        if (shared.count(attribute) == 0) continue;  // outside the annotated pool
        if (want_auc) {
          vp::LabelSet positives;
          for (const auto& g : gold) {
            if (g.gold_adjectives.count(attribute) > 0) positives.insert(g.image_id);
          }
          std::vector<std::pair<std::string, double>> scores;
          for (const auto& r : set.adjectives) {
            for (const auto& item : r.items) {
              if (item.label == attribute) {
                scores.emplace_back(r.query_id, item.score);
                break;
              }
            }
          }
          try {
            rep.per_attribute_auc[attribute] = vp::auc(scores, positives);
          } catch (const vp::NumericError&) {
            // one-class attribute on this test set; nothing to report
          }
        }
        if (want_mean_rank) {
          extra_mean_rank[attribute] = vp::mean_attribute_rank(set.adjectives, attribute);
        }
      }
    }

    nlohmann::json adj_json = rep.to_json();
    if (want_mean_rank) adj_json["per_attribute_mean_rank"] = extra_mean_rank;
    report["adjectives"] = adj_json;
    table += "== adjectives ==\n" + rep.to_table();
  }

  if (!set.nouns.empty()) {
    std::vector<vp::GoldAnnotation> noun_gold;
    for (const auto& g : gold) {
      if (g.gold_noun) noun_gold.push_back({g.image_id, {*g.gold_noun}, std::nullopt});
    }
    vp::EvalReport rep = metrics_for(set.nouns, noun_gold);
    report["nouns"] = rep.to_json();
    table += "== nouns ==\n" + rep.to_table();
  }

  if (cfg.get_bool_or("evaluate", "concreteness", false)) {
    if (set.adjectives.empty()) {
      throw CliError(3, "data mismatch: concreteness needs adjective rankings");
    }
    const auto cooc = vp::ModifierCooc::load(cfg.get_input_path("paths", "cooc"));
    const auto concreteness = load_score_file(cfg.get_input_path("paths", "concreteness"));
    const int top_n = static_cast<int>(cfg.get_integer_or("evaluate", "concreteness_top_n", 5));
    if (top_n < 1) throw CliError(2, "config error: evaluate.concreteness_top_n must be >= 1");
    double sum = 0.0;
    int defined = 0;
    std::vector<std::string> undefined_ids;
    for (const auto& r : set.adjectives) {
      const auto res = vp::concreteness_score(r, concreteness, cooc, top_n);
      if (res.defined) {
        sum += res.score;
        ++defined;
      } else {
        undefined_ids.push_back(r.query_id);
      }
    }
    nlohmann::json c;
    c["top_n"] = top_n;
    c["defined_images"] = defined;
    c["undefined_images"] = undefined_ids;
    if (defined > 0) {
      c["mean_score"] = sum / defined;
      table += "== concreteness ==\nmean_score " +
               vp::linalg::format_double(sum / defined) + " over " + std::to_string(defined) +
               " image(s)\n";
    } else {
      c["mean_score"] = nullptr;
      table += "== concreteness ==\nundefined for every image\n";
    }
    report["concreteness"] = c;
  }

  write_json_file(ctx.output_dir / "report.json", report);
  write_text_file(ctx.output_dir / "report.txt", ctx.comment() + table);
  std::cout << table;
  return 0;
}

// The adjective vocabulary: every ADJ-tagged word, in space order.
vp::EmbeddingSpace adjective_space(const vp::EmbeddingSpace& words) {
  if (!words.has_pos_tags()) {
    throw CliError(3, "data mismatch: the adjective vocabulary needs pos tags");
  }
  std::vector<std::string> vocab;
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (*words.pos(words.labels()[i]) == vp::Pos::Adj) {
      vocab.push_back(words.labels()[i]);
      rows.push_back(static_cast<Eigen::Index>(i));
    }
  }
  if (vocab.empty()) throw CliError(3, "data mismatch: no ADJ-tagged words");
  Eigen::MatrixXd matrix(static_cast<Eigen::Index>(rows.size()), words.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    matrix.row(static_cast<Eigen::Index>(i)) = words.matrix().row(rows[i]);
  }
  return vp::EmbeddingSpace(std::move(vocab), std::move(matrix));
}

std::vector<vp::AttributeVector> compute_attribute_vectors(
    const CommandContext& ctx, const vp::ProjectionModel& model,
    const vp::DecompositionModel& dec, const vp::EmbeddingSpace& adjectives,
    const vp::EmbeddingSpace& images, const std::string& scope) {
  std::vector<vp::AttributeVector> out;
  out.reserve(images.size());
  if (scope == "per_image") {
    for (const auto& id : images.labels()) {
      out.push_back(vp::attribute_vector(model, dec, adjectives, images.vector(id), id));
    }
    return out;
  }
  // Global scope: one corpus-wide threshold, the mean of every cosine.
  std::vector<Eigen::VectorXd> raw;
  raw.reserve(images.size());
  double sum = 0.0;
  for (const auto& id : images.labels()) {
    raw.push_back(vp::raw_attribute_cosines(model, dec, adjectives, images.vector(id)));
    sum += raw.back().sum();
  }
  const double threshold =
      sum / (static_cast<double>(images.size()) * static_cast<double>(adjectives.size()));
  for (std::size_t i = 0; i < images.size(); ++i) {
    out.push_back(vp::attribute_vector_with_threshold(model, dec, adjectives,
                                                      images.vector(images.labels()[i]),
                                                      threshold, images.labels()[i]));
  }
  return out;
}

int cmd_represent(const CommandContext& ctx) {
  const auto& cfg = ctx.cfg;
  const std::string scope = cfg.get_string_or("represent", "scope", "per_image");
  if (scope != "per_image" && scope != "global") {
    throw CliError(2, "config error: represent.scope must be per_image or global");
  }
  const auto words = load_words(cfg);
  const std::string image_key =
      cfg.has("paths", "represent_images") ? "represent_images" : "test_images";
  const auto images = load_images(cfg, image_key);
  const auto model = load_model_checked(ctx, images);
  const auto dec = load_dec_checked(ctx, model, words);
  const auto adjectives = adjective_space(words);

  std::vector<vp::AttributeVector> vectors;
  try {
    vectors = compute_attribute_vectors(ctx, model, dec, adjectives, images, scope);
  } catch (const vp::ContractError& e) {
    throw CliError(3, std::string("data mismatch: ") + e.what());
  }

  const auto path = out_path(ctx, "attributes", "attributes.tsv");
  vp::save_attribute_vectors(vectors, adjectives.labels(), path);
  // Stamp provenance above the rows the library wrote.
  const std::string body = vp::detail::read_file(path);
  write_text_file(path, ctx.comment() + body);
  std::cout << "represented " << vectors.size() << " image(s) over " << adjectives.size()
            << " adjectives\n";
  return 0;
}

int cmd_classify(const CommandContext& ctx) {
  const auto& cfg = ctx.cfg;
  const std::string variant = cfg.get_string_or("classify", "variant", "all");
  if (variant != "raw" && variant != "attributes" && variant != "fused" && variant != "all") {
    throw CliError(2, "config error: classify.variant must be raw, attributes, fused or all");
  }
  const auto words = load_words(cfg);
  const auto train_images = load_images(cfg, "classify_train");
  const auto test_images = load_images(cfg, "classify_test");
  const auto train_pairs = load_pairs_file(cfg.get_input_path("paths", "classify_train_labels"));
  const auto test_pairs = load_pairs_file(cfg.get_input_path("paths", "classify_test_labels"));
  if (train_images.dim() != test_images.dim()) {
    throw CliError(3, "data mismatch: train and test image dimensions differ");
  }
  const auto model = load_model_checked(ctx, train_images);
  const auto dec = load_dec_checked(ctx, model, words);
  const auto adjectives = adjective_space(words);

  vp::OvaOptions options;
  options.regularization = cfg.get_double_or("classify", "regularization", 1e-3);
  options.epochs = static_cast<int>(cfg.get_integer_or("classify", "epochs", 200));
  options.eta0 = cfg.get_double_or("classify", "eta0", 1.0);
  options.seed = ctx.seed;
  if (options.regularization <= 0 || options.epochs < 1 || options.eta0 <= 0) {
    throw CliError(2, "config error: classify needs regularization > 0, epochs >= 1, eta0 > 0");
  }

  const auto gather = [&](const vp::EmbeddingSpace& images,
                          const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::vector<Eigen::VectorXd> raw;
    std::vector<Eigen::VectorXd> attr;
    std::vector<std::string> labels;
    for (const auto& [id, label] : pairs) {
      if (!images.contains(id)) {
        throw CliError(3, "data mismatch: labeled item '" + id + "' is missing from the images");
      }
      raw.push_back(images.vector(id));
      attr.push_back(
          vp::attribute_vector(model, dec, adjectives, images.vector(id), id).values);
      labels.push_back(label);
    }
    return std::tuple(std::move(raw), std::move(attr), std::move(labels));
  };

  auto [train_raw, train_attr, train_labels] = gather(train_images, train_pairs);
  auto [test_raw, test_attr, test_labels] = gather(test_images, test_pairs);

  // Fused features share one basis fitted on the training concatenation.
  const int concat_dim = static_cast<int>(train_raw.front().size() + train_attr.front().size());
  const int default_fused = std::min<int>(concat_dim, static_cast<int>(train_raw.size()));
  const int fused_dim =
      static_cast<int>(cfg.get_integer_or("classify", "fused_dim", default_fused));
  vp::FusionBasis basis;
  const bool want_fused = variant == "fused" || variant == "all";
  if (want_fused) {
    if (fused_dim < 1 || fused_dim > concat_dim ||
        fused_dim > static_cast<int>(train_raw.size())) {
      throw CliError(3, "data mismatch: classify.fused_dim must fit the training concatenation");
    }
    Eigen::MatrixXd training(train_raw.size(), concat_dim);
    for (std::size_t i = 0; i < train_raw.size(); ++i) {
      training.row(static_cast<Eigen::Index>(i)).head(train_raw[i].size()) =
          train_raw[i].transpose();
      training.row(static_cast<Eigen::Index>(i)).tail(train_attr[i].size()) =
          train_attr[i].transpose();
    }
    basis.fit(training, fused_dim);
  }
  const auto fuse_one = [&](const Eigen::VectorXd& raw, const Eigen::VectorXd& attr) {
    Eigen::VectorXd concatenated(raw.size() + attr.size());
    concatenated << raw, attr;
    return basis.fold_in(concatenated);
  };

  nlohmann::json report;
  report["metadata"] = ctx.meta();
  report["variants"] = nlohmann::json::object();

  const auto run_variant = [&](const std::string& name,
                               const std::vector<Eigen::VectorXd>& train_x,
                               const std::vector<Eigen::VectorXd>& test_x) {
    std::vector<vp::LabeledExample> train, test;
    for (std::size_t i = 0; i < train_x.size(); ++i) train.push_back({train_x[i], train_labels[i]});
    for (std::size_t i = 0; i < test_x.size(); ++i) test.push_back({test_x[i], test_labels[i]});
    const auto clf = vp::train_ova(train, options);
    const auto confusion = vp::confusion_matrix(clf, test);

    nlohmann::json cj = clf.to_json();
    cj["metadata"] = ctx.meta();
    write_json_file(ctx.output_dir / ("classifier_" + name + ".json"), cj);

    nlohmann::json v;
    v["feature_dim"] = clf.feature_dim();
    v["accuracy"] = confusion.accuracy;
    v["classes"] = confusion.classes;
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < confusion.proportions.rows(); ++r) {
      auto row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < confusion.proportions.cols(); ++c) {
        row.push_back(confusion.proportions(r, c));
      }
      rows.push_back(row);
    }
    v["confusion"] = rows;
    report["variants"][name] = v;
    std::cout << name << " accuracy " << vp::linalg::format_double(confusion.accuracy) << "\n";
  };

  try {
    if (variant == "raw" || variant == "all") run_variant("raw", train_raw, test_raw);
    if (variant == "attributes" || variant == "all") {
      run_variant("attributes", train_attr, test_attr);
    }
    if (want_fused) {
      std::vector<Eigen::VectorXd> train_fused, test_fused;
      for (std::size_t i = 0; i < train_raw.size(); ++i) {
        train_fused.push_back(fuse_one(train_raw[i], train_attr[i]));
      }
      for (std::size_t i = 0; i < test_raw.size(); ++i) {
        test_fused.push_back(fuse_one(test_raw[i], test_attr[i]));
      }
      run_variant("fused", train_fused, test_fused);
    }
  } catch (const vp::ContractError& e) {
    throw CliError(3, std::string("data mismatch: ") + e.what());
  }

  write_json_file(ctx.output_dir / "classify_report.json", report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zero-shot cross-modal image labeling toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(vp::kLibraryVersion));

  struct CommandArgs {
    std::string config;
    std::vector<std::string> sets;
  };
  const auto add_common = [](CLI::App* cmd, CommandArgs& args) {
    cmd->add_option("--config", args.config, "configuration file")->required();
    cmd->add_option("--set", args.sets, "override a key, section.key=value");
  };

  CommandArgs train_proj_args, train_dec_args, annotate_args, evaluate_args, represent_args,
      classify_args;
  auto* train_proj = app.add_subcommand("train-proj", "train a cross-modal projection");
  add_common(train_proj, train_proj_args);
  auto* train_dec = app.add_subcommand("train-dec", "train a phrase decomposition");
  add_common(train_dec, train_dec_args);
  auto* annotate = app.add_subcommand("annotate", "rank labels for each image");
  add_common(annotate, annotate_args);
  auto* evaluate = app.add_subcommand("evaluate", "score annotations against gold");
  add_common(evaluate, evaluate_args);
  auto* represent = app.add_subcommand("represent", "build attribute-centric image vectors");
  add_common(represent, represent_args);
  auto* classify = app.add_subcommand("classify", "train and score object classifiers");
  add_common(classify, classify_args);

  visphrase::tools::FixtureParams fixture_params;
  std::string fixtures_out;
  auto* make_fixtures = app.add_subcommand("make-fixtures", "generate a synthetic dataset");
  make_fixtures->add_option("--out", fixtures_out, "output directory")->required();
  make_fixtures->add_option("--seed", fixture_params.seed, "generator seed");
  make_fixtures->add_option("--adjectives", fixture_params.adjectives, "adjective count");
  make_fixtures->add_option("--nouns", fixture_params.nouns, "noun count");
  make_fixtures->add_option("--word-dim", fixture_params.word_dim, "linguistic dimension");
  make_fixtures->add_option("--image-dim", fixture_params.image_dim, "visual dimension");
  make_fixtures->add_option("--pairs-per-noun", fixture_params.pairs_per_noun,
                            "adjective partners per noun");
  make_fixtures->add_option("--train-images-per-pair", fixture_params.train_images_per_pair,
                            "training images per phrase");
  make_fixtures->add_option("--test-nouns", fixture_params.test_nouns, "held-out object labels");
  make_fixtures->add_option("--test-images-per-pair", fixture_params.test_images_per_pair,
                            "test images per phrase");
  make_fixtures->add_option("--image-noise", fixture_params.image_noise, "visual noise sigma");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage problems share the config-error exit code; --help and
    // --version exit 0.
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(make_fixtures)) {
      const auto world = visphrase::tools::make_world(fixture_params);
      visphrase::tools::write_world(world, fixture_params, fixtures_out);
      std::cout << "fixtures written to " << fixtures_out << "\n";
      return 0;
    }
    if (app.got_subcommand(train_proj)) {
      return cmd_train_proj(make_context(train_proj_args.config, train_proj_args.sets));
    }
    if (app.got_subcommand(train_dec)) {
      return cmd_train_dec(make_context(train_dec_args.config, train_dec_args.sets));
    }
    if (app.got_subcommand(annotate)) {
      return cmd_annotate(make_context(annotate_args.config, annotate_args.sets));
    }
    if (app.got_subcommand(evaluate)) {
      return cmd_evaluate(make_context(evaluate_args.config, evaluate_args.sets));
    }
    if (app.got_subcommand(represent)) {
      return cmd_represent(make_context(represent_args.config, represent_args.sets));
    }
    if (app.got_subcommand(classify)) {
      return cmd_classify(make_context(classify_args.config, classify_args.sets));
    }
    return 0;
  } catch (const CliError& e) {
    std::cerr << e.what() << "\n";
    return e.exit_code();
  } catch (const vp::AlignmentError& e) {
    std::cerr << "alignment error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
