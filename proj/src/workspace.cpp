#include "commshift/workspace.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "commshift/io.hpp"
#include "commshift/rng.hpp"
#include "commshift/shiftindex.hpp"
#include "commshift/stats.hpp"
#include "commshift/synthgen.hpp"

namespace commshift::workspace {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// narrow getter: present key of wrong type should fail loudly, not default
template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

vectorspace::TrainingConfig parse_training(const json& j,
                                           vectorspace::TrainingConfig base) {
  base.dim = get_or<std::uint32_t>(j, "dim", base.dim);
  base.window = get_or<std::uint32_t>(j, "window", base.window);
  base.negatives = get_or<std::uint32_t>(j, "negatives", base.negatives);
  base.epochs = get_or<std::uint32_t>(j, "epochs", base.epochs);
  base.learning_rate = get_or<float>(j, "learning_rate", base.learning_rate);
  base.min_lr = get_or<float>(j, "min_lr", base.min_lr);
  base.l2_lambda = get_or<float>(j, "l2_lambda", base.l2_lambda);
  base.unigram_power = get_or<float>(j, "unigram_power", base.unigram_power);
  base.subsample_frequent = get_or<bool>(j, "subsample_frequent", base.subsample_frequent);
  base.subsample_threshold =
      get_or<float>(j, "subsample_threshold", base.subsample_threshold);
  base.threads = get_or<std::uint32_t>(j, "threads", base.threads);
  return base;
}

lmeval::LMConfig parse_lm(const json& j, lmeval::LMConfig base) {
  base.layers = get_or<std::uint32_t>(j, "layers", base.layers);
  base.hidden_size = get_or<std::uint32_t>(j, "hidden_size", base.hidden_size);
  base.epochs = get_or<std::uint32_t>(j, "epochs", base.epochs);
  base.adam_lr = get_or<float>(j, "adam_lr", base.adam_lr);
  base.dropout = get_or<float>(j, "dropout", base.dropout);
  base.batch_size = get_or<std::uint32_t>(j, "batch_size", base.batch_size);
  base.bptt = get_or<std::uint32_t>(j, "bptt", base.bptt);
  base.clip_norm = get_or<float>(j, "clip_norm", base.clip_norm);
  base.eval_batch_size = get_or<std::uint32_t>(j, "eval_batch_size", base.eval_batch_size);
  if (j.contains("split_ratios")) {
    auto r = j.at("split_ratios");
    if (!r.is_array() || r.size() != 3)
      throw DataError("split_ratios must be an array of three numbers");
    for (std::size_t i = 0; i < 3; ++i) base.split_ratios[i] = r[i].get<double>();
  }
  return base;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void note(const RunFlags& flags, const std::string& msg) {
  if (flags.verbose) std::cerr << "[commshift] " << msg << "\n";
}

corpus::CorpusStore load_store(const fs::path& path) {
  if (!io::file_exists(path.string()))
    throw DataError("missing input file: " + path.string());
  return corpus::CorpusStore::load(path.string());
}

vectorspace::EmbeddingSpace load_space(const fs::path& path) {
  if (!io::file_exists(path.string()))
    throw DataError("missing input file: " + path.string());
  return vectorspace::EmbeddingSpace::load(path.string());
}

std::uint64_t effective_seed(const WorkspaceConfig& cfg, const RunFlags& flags) {
  return flags.seed ? *flags.seed : cfg.seed;
}

// word sets feeding contrast and the substitution experiment
std::pair<std::vector<std::string>, std::vector<std::string>> select_groups(
    const shiftindex::ShiftTable& table, std::string_view column,
    std::string_view mode, std::size_t k) {
  if (mode == "topk") {
    auto shift =
        shiftindex::select_words(table, column, shiftindex::SelectionMode::topk_shift, k);
    auto noshift = shiftindex::select_words(
        table, column, shiftindex::SelectionMode::bottomk_positive_noshift, k);
    return {shift.words, noshift.words};
  }
  if (mode == "sigma") {
    auto shift = shiftindex::select_words(table, column,
                                          shiftindex::SelectionMode::sigma2_shift);
    auto noshift = shiftindex::select_words(
        table, column, shiftindex::SelectionMode::below_sigma1_noshift);
    return {shift.words, noshift.words};
  }
  throw UsageError("unknown selection mode: " + std::string(mode) +
                   " (expected topk or sigma)");
}

}  // namespace

WorkspaceConfig WorkspaceConfig::parse(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("bad workspace config: ") + e.what());
  }
  try {
    WorkspaceConfig cfg;
    if (!j.contains("communities") || !j.at("communities").is_array() ||
        j.at("communities").empty())
      throw DataError("config needs a non-empty communities array");
    for (const auto& c : j.at("communities"))
      cfg.communities.push_back(c.get<std::string>());
    cfg.global_name = get_or<std::string>(j, "global", cfg.global_name);

    if (j.contains("domains")) {
      for (const auto& [name, members] : j.at("domains").items()) {
        DomainDecl d;
        d.name = name;
        for (const auto& m : members) d.members.push_back(m.get<std::string>());
        cfg.domains.push_back(std::move(d));
      }
      std::sort(cfg.domains.begin(), cfg.domains.end(),
                [](const DomainDecl& a, const DomainDecl& b) { return a.name < b.name; });
    } else {
      cfg.domains.push_back({"domain", cfg.communities});
    }

    cfg.min_count = get_or<std::uint64_t>(j, "min_count", cfg.min_count);
    cfg.lowercase = get_or<bool>(j, "lowercase", cfg.lowercase);
    cfg.subsample_equalize = get_or<bool>(j, "subsample_equalize", cfg.subsample_equalize);
    cfg.subsample_tokens = get_or<std::uint64_t>(j, "subsample_tokens", cfg.subsample_tokens);
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    if (j.contains("training")) cfg.training = parse_training(j.at("training"), cfg.training);
    if (j.contains("lm")) cfg.lm = parse_lm(j.at("lm"), cfg.lm);
    if (j.contains("features")) {
      const auto& f = j.at("features");
      std::string variant = get_or<std::string>(f, "variant", "camera_ready");
      if (variant == "camera_ready")
        cfg.features.variant = lexfeatures::DisseminationVariant::camera_ready;
      else if (variant == "draft")
        cfg.features.variant = lexfeatures::DisseminationVariant::draft;
      else
        throw DataError("unknown dissemination variant: " + variant);
      cfg.features.min_count = get_or<std::uint64_t>(f, "min_count", cfg.features.min_count);
    }
    if (j.contains("selection"))
      cfg.selection_k = get_or<std::uint32_t>(j.at("selection"), "k", cfg.selection_k);

    std::set<std::string> seen(cfg.communities.begin(), cfg.communities.end());
    if (seen.size() != cfg.communities.size())
      throw DataError("duplicate community names in config");
    if (seen.count(cfg.global_name))
      throw DataError("global community listed among members");
    for (const auto& d : cfg.domains) {
      if (d.members.size() < 2)
        throw DataError("domain " + d.name + " needs at least two member communities");
      for (const auto& m : d.members)
        if (!seen.count(m))
          throw DataError("domain " + d.name + " references unknown community " + m);
    }
    return cfg;
  } catch (const json::exception& e) {
    throw DataError(std::string("bad workspace config: ") + e.what());
  }
}

WorkspaceConfig WorkspaceConfig::load(const fs::path& path) {
  if (!io::file_exists(path.string()))
    throw DataError("missing config file: " + path.string());
  return parse(io::read_text(path.string()));
}

std::vector<corpus::Community> WorkspaceConfig::community_list() const {
  std::vector<corpus::Community> out;
  for (const auto& c : communities)
    out.push_back({c, corpus::CommunityKind::member});
  out.push_back({global_name, corpus::CommunityKind::global});
  return out;
}

const DomainDecl& WorkspaceConfig::domain(std::string_view name) const {
  for (const auto& d : domains)
    if (d.name == name) return d;
  throw DataError("unknown domain: " + std::string(name));
}

const DomainDecl& WorkspaceConfig::sole_domain() const {
  if (domains.size() != 1)
    throw UsageError("config declares several domains; pass --domain");
  return domains.front();
}

void check_overwrite(const fs::path& out, bool force) {
  if (!force && fs::exists(out))
    throw UsageError("output exists: " + out.string() + " (use --force to overwrite)");
}

void write_manifest(const fs::path& workspace_root, std::string_view name,
                    const std::vector<fs::path>& inputs, const std::string& params_json,
                    const std::vector<fs::path>& outputs, double wall_seconds) {
  json m;
  m["stage"] = std::string(name);
  json in = json::object();
  for (const auto& p : inputs)
    in[p.string()] = io::file_exists(p.string()) ? io::file_digest_hex(p.string()) : "absent";
  m["inputs"] = std::move(in);
  m["params"] = json::parse(params_json.empty() ? "{}" : params_json);
  json out = json::object();
  for (const auto& p : outputs)
    out[p.string()] = io::file_exists(p.string()) ? io::file_digest_hex(p.string()) : "absent";
  m["outputs"] = std::move(out);
  m["wall_seconds"] = wall_seconds;

  fs::path dir = workspace_root / "manifests";
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InternalError("cannot create " + dir.string());
  std::string fname(name);
  for (char& ch : fname)
    if (ch == '/' || ch == ':') ch = '_';
  io::atomic_write_text((dir / (fname + ".json")).string(), m.dump(2) + "\n");
}

void run_ingest(const WorkspaceConfig& cfg, const RunFlags& flags,
                const std::vector<std::string>& inputs, const fs::path& out_store,
                const fs::path& workspace_root) {
  auto start = std::chrono::steady_clock::now();
  check_overwrite(out_store, flags.force);
  if (inputs.empty()) throw UsageError("ingest needs at least one --input path");

  corpus::IngestConfig ic;
  ic.communities = cfg.community_list();
  ic.tokenizer.lowercase = cfg.lowercase;
  corpus::IngestStats stats;
  corpus::CorpusStore store = corpus::ingest(ic, inputs, &stats);
  note(flags, "ingested " + std::to_string(stats.kept) + "/" +
                  std::to_string(stats.records) + " records (" +
                  std::to_string(stats.skipped_unknown_community) +
                  " unknown community, " + std::to_string(stats.malformed) +
                  " malformed)");

  if (cfg.subsample_equalize || cfg.subsample_tokens > 0) {
    std::uint64_t target = cfg.subsample_tokens;
    if (cfg.subsample_equalize) {
      target = std::numeric_limits<std::uint64_t>::max();
      for (std::size_t c = 0; c < store.community_count(); ++c)
        target = std::min(target, store.total_tokens(c));
    }
    std::uint64_t seed = effective_seed(cfg, flags);
    for (std::size_t c = 0; c < store.community_count(); ++c)
      if (store.total_tokens(c) > target) {
        std::string cname = store.community(c).name;
        store = corpus::subsample(store, c, target, seed);
        note(flags, "subsampled " + cname + " to " +
                        std::to_string(store.total_tokens(c)) + " tokens");
      }
  }

  store.save(out_store.string());
  json params{{"min_count", cfg.min_count},
              {"lowercase", cfg.lowercase},
              {"subsample_equalize", cfg.subsample_equalize},
              {"subsample_tokens", cfg.subsample_tokens},
              {"seed", effective_seed(cfg, flags)}};
  std::vector<fs::path> input_paths(inputs.begin(), inputs.end());
  write_manifest(workspace_root, "ingest", input_paths, params.dump(), {out_store},
                 elapsed_seconds(start));
}

void run_synth(const fs::path& scenario_path, const RunFlags& flags,
               const fs::path& out_jsonl, const fs::path& workspace_root) {
  auto start = std::chrono::steady_clock::now();
  check_overwrite(out_jsonl, flags.force);
  fs::path meta_path = out_jsonl;
  meta_path += ".meta.json";
  check_overwrite(meta_path, flags.force);
  if (!io::file_exists(scenario_path.string()))
    throw DataError("missing input file: " + scenario_path.string());

  synthgen::ShiftScenario sc = synthgen::parse_scenario(io::read_text(scenario_path.string()));
  if (flags.seed) sc.seed = *flags.seed;

  fs::path tmp = out_jsonl;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InternalError("cannot write " + tmp.string());
    synthgen::GeneratedMeta meta = synthgen::generate(sc, [&](const corpus::IngestRecord& r) {
      json line{{"community", r.community}, {"author", r.author}, {"body", r.body}};
      out << line.dump() << "\n";
    });
    if (!out.good()) throw InternalError("short write to " + tmp.string());
    out.close();
    io::atomic_write_text(meta_path.string(), synthgen::meta_to_json(meta) + "\n");
  }
  std::error_code ec;
  fs::rename(tmp, out_jsonl, ec);
  if (ec) throw InternalError("cannot move " + tmp.string() + " into place");
  note(flags, "synthesized corpus at " + out_jsonl.string());

  json params{{"scenario", scenario_path.string()}, {"seed", sc.seed}};
  write_manifest(workspace_root, "synth", {scenario_path}, params.dump(),
                 {out_jsonl, meta_path}, elapsed_seconds(start));
}

void run_train(const WorkspaceConfig& cfg, const RunFlags& flags, const fs::path& store_path,
               std::string_view domain, const fs::path& out_space,
               const fs::path& workspace_root) {
  auto start = std::chrono::steady_clock::now();
  check_overwrite(out_space, flags.force);
  const DomainDecl& d = domain.empty() ? cfg.sole_domain() : cfg.domain(domain);

  corpus::CorpusStore full = load_store(store_path);
  std::vector<std::string> names = d.members;
  names.push_back(cfg.global_name);
  corpus::CorpusStore store = full.restricted(names);

  corpus::Vocabulary vocab = corpus::Vocabulary::build(store, cfg.min_count);
  note(flags, "domain " + d.name + ": shared vocabulary of " +
                  std::to_string(vocab.size()) + " words");

  vectorspace::TrainingConfig tc = cfg.training;
  tc.seed = derive_seed(effective_seed(cfg, flags), "train", fnv1a(d.name));
  vectorspace::EmbeddingSpace space = vectorspace::train(store, vocab, tc);
  space.save(out_space.string());

  json params{{"domain", d.name},     {"dim", tc.dim},
              {"window", tc.window},  {"negatives", tc.negatives},
              {"epochs", tc.epochs},  {"learning_rate", tc.learning_rate},
              {"l2_lambda", tc.l2_lambda}, {"min_count", cfg.min_count},
              {"threads", tc.threads}, {"seed", tc.seed}};
  write_manifest(workspace_root, "train_" + d.name, {store_path}, params.dump(),
                 {out_space}, elapsed_seconds(start));
}

void run_shift(const WorkspaceConfig& cfg, const RunFlags& flags, const fs::path& space_path,
               std::string_view domain, const fs::path& out_tsv,
               const fs::path& workspace_root) {
  auto start = std::chrono::steady_clock::now();
  check_overwrite(out_tsv, flags.force);
  const DomainDecl& d = domain.empty() ? cfg.sole_domain() : cfg.domain(domain);

  vectorspace::EmbeddingSpace space = load_space(space_path);
  shiftindex::ShiftTable table = shiftindex::shift_table(space, d.name);
  shiftindex::write_tsv(table, out_tsv.string());
  note(flags, "shift table over " + std::to_string(table.words.size()) + " words");

  json params{{"domain", d.name}};
  write_manifest(workspace_root, "shift_" + d.name, {space_path}, params.dump(),
                 {out_tsv}, elapsed_seconds(start));
}

void run_features(const WorkspaceConfig& cfg, const RunFlags& flags,
                  const fs::path& store_path, std::string_view scope_text,
                  const fs::path& out_tsv, const fs::path& workspace_root) {
  auto start = std::chrono::steady_clock::now();
  check_overwrite(out_tsv, flags.force);
  corpus::CorpusStore store = load_store(store_path);

  lexfeatures::Scope scope;
  std::string manifest_tag;
  constexpr std::string_view kDomainPrefix = "domain:";
  if (scope_text.substr(0, kDomainPrefix.size()) == kDomainPrefix) {
    std::string name(scope_text.substr(kDomainPrefix.size()));
    const DomainDecl& d = cfg.domain(name);
    scope = lexfeatures::Scope::domain(d.name, d.members);
    manifest_tag = "features_domain_" + d.name;
  } else {
    std::string name(scope_text);
    bool in_domain = false;
    for (const auto& d : cfg.domains)
      if (std::find(d.members.begin(), d.members.end(), name) != d.members.end()) {
        scope = lexfeatures::Scope::community(name, d.members);
        in_domain = true;
        break;
      }
    if (!in_domain) throw DataError("community " + name + " is not in any domain");
    manifest_tag = "features_" + name;
  }

  lexfeatures::FeatureTable table = lexfeatures::feature_table(store, scope, cfg.features);
  table.write_tsv(out_tsv.string());
  note(flags, scope.label() + ": " + std::to_string(table.rows().size()) + " feature rows");

  json params{{"scope", scope.label()},
              {"variant", cfg.features.variant == lexfeatures::DisseminationVariant::draft
                              ? "draft"
                              : "camera_ready"},
              {"min_count", cfg.features.min_count}};
  write_manifest(workspace_root, manifest_tag, {store_path}, params.dump(), {out_tsv},
                 elapsed_seconds(start));
}

void run_contrast(const WorkspaceConfig& cfg, const RunFlags& flags,
                  const fs::path& shift_tsv, const fs::path& features_tsv,
                  std::string_view column, std::string_view mode, const fs::path& out_tsv,
                  const fs::path& workspace_root) {
  auto start = std::chrono::steady_clock::now();
  check_overwrite(out_tsv, flags.force);
  if (!io::file_exists(shift_tsv.string()))
    throw DataError("missing input file: " + shift_tsv.string());
  if (!io::file_exists(features_tsv.string()))
    throw DataError("missing input file: " + features_tsv.string());

  shiftindex::ShiftTable table = shiftindex::read_tsv(shift_tsv.string());
  lexfeatures::FeatureTable features = lexfeatures::FeatureTable::read_tsv(features_tsv.string());

  auto [shift_words, noshift_words] = select_groups(table, column, mode, cfg.selection_k);
  auto keep_known = [&](std::vector<std::string>& words) {
    std::vector<std::string> kept;
    for (auto& w : words) {
      if (features.find(w))
        kept.push_back(std::move(w));
      else
        note(flags, "word " + w + " missing from the feature table, dropped");
    }
    words = std::move(kept);
  };
  keep_known(shift_words);
  keep_known(noshift_words);

  stats::ContrastReport report = stats::feature_contrast(shift_words, noshift_words, features);
  stats::write_contrast_tsv(report, out_tsv.string());

  std::string tag = "contrast_" + out_tsv.stem().string();
  json params{{"column", std::string(column)},
              {"mode", std::string(mode)},
              {"k", cfg.selection_k}};
  write_manifest(workspace_root, tag, {shift_tsv, features_tsv}, params.dump(), {out_tsv},
                 elapsed_seconds(start));
}

void run_lm_train(const WorkspaceConfig& cfg, const RunFlags& flags,
                  const fs::path& store_path, const fs::path& space_path,
                  std::string_view community, const fs::path& out_model,
                  const fs::path& workspace_root) {
  auto start = std::chrono::steady_clock::now();
  check_overwrite(out_model, flags.force);
  corpus::CorpusStore store = load_store(store_path);
  vectorspace::EmbeddingSpace space = load_space(space_path);

  lmeval::LMConfig lc = cfg.lm;
  if (lc.hidden_size != space.dim()) {
    note(flags, "hidden size follows the embedding dimension (" +
                    std::to_string(space.dim()) + ")");
    lc.hidden_size = space.dim();
  }
  lc.seed = derive_seed(effective_seed(cfg, flags), "lm", fnv1a(community));

  std::vector<lmeval::EpochLog> log;
  lmeval::LanguageModel lm =
      lmeval::train_lm(store, space, community, lc, flags.verbose ? &log : nullptr);
  for (const auto& e : log)
    note(flags, std::string(community) + " epoch " + std::to_string(e.epoch) +
                    ": train loss " + io::fixed6(e.train_loss) + ", valid ppl " +
                    io::fixed6(e.valid_perplexity));
  lm.save(out_model);

  json params{{"community", std::string(community)},
              {"layers", lc.layers},
              {"hidden_size", lc.hidden_size},
              {"epochs", lc.epochs},
              {"adam_lr", lc.adam_lr},
              {"dropout", lc.dropout},
              {"batch_size", lc.batch_size},
              {"bptt", lc.bptt},
              {"clip_norm", lc.clip_norm},
              {"seed", lc.seed}};
  write_manifest(workspace_root, "lm-train_" + std::string(community),
                 {store_path, space_path}, params.dump(), {out_model},
                 elapsed_seconds(start));
}

void run_lm_eval(const WorkspaceConfig& cfg, const RunFlags& flags,
                 const fs::path& models_dir, const fs::path& shift_tsv,
                 const fs::path& store_path, const fs::path& space_path,
                 const fs::path& out_tsv, const fs::path& workspace_root) {
  auto start = std::chrono::steady_clock::now();
  check_overwrite(out_tsv, flags.force);
  if (!io::file_exists(shift_tsv.string()))
    throw DataError("missing input file: " + shift_tsv.string());

  corpus::CorpusStore store = load_store(store_path);
  vectorspace::EmbeddingSpace space = load_space(space_path);
  shiftindex::ShiftTable table = shiftindex::read_tsv(shift_tsv.string());

  std::map<std::string, lmeval::LanguageModel> models;
  std::vector<fs::path> model_paths;
  std::vector<std::string> needed = table.communities;
  needed.push_back(cfg.global_name);
  for (const auto& name : needed) {
    fs::path p = models_dir / (name + ".clm");
    if (!io::file_exists(p.string()))
      throw DataError("missing input file: " + p.string());
    models.emplace(name, lmeval::LanguageModel::load(p));
    model_paths.push_back(p);
  }

  std::vector<lmeval::SubstitutionRowSpec> rows;
  auto add_row = [&](const std::string& label, bool domain_row,
                     const std::string& community, std::vector<std::string> words) {
    lmeval::SubstitutionRowSpec spec;
    spec.label = label;
    spec.domain_row = domain_row;
    spec.community = community;
    spec.members = table.communities;
    spec.words = std::move(words);
    rows.push_back(std::move(spec));
  };
  auto [d_shift, d_noshift] = select_groups(table, "dsi", "topk", cfg.selection_k);
  add_row("domain/shift", true, "", d_shift);
  add_row("domain/no.shift", true, "", d_noshift);
  for (const auto& c : table.communities) {
    auto [c_shift, c_noshift] = select_groups(table, "csi_" + c, "topk", cfg.selection_k);
    add_row(c + "/shift", false, c, c_shift);
    add_row(c + "/no.shift", false, c, c_noshift);
  }

  lmeval::SubstitutionReport report =
      lmeval::substitution_experiment(space, store, models, rows);
  for (const auto& w : report.warnings) note(flags, w);
  lmeval::write_substitution_tsv(report, out_tsv);

  std::vector<fs::path> inputs{shift_tsv, store_path, space_path};
  inputs.insert(inputs.end(), model_paths.begin(), model_paths.end());
  json params{{"k", cfg.selection_k}};
  write_manifest(workspace_root, "lm-eval_" + out_tsv.stem().string(), inputs,
                 params.dump(), {out_tsv}, elapsed_seconds(start));
}

namespace {

// --- report rendering -------------------------------------------------------

std::string render_tsv_block(const fs::path& path, std::size_t max_rows = 64) {
  auto rows = io::read_tsv(path.string());
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (width.size() <= i) width.resize(i + 1, 0);
      width[i] = std::max(width[i], r[i].size());
    }
  std::string out;
  std::size_t shown = 0;
  for (const auto& r : rows) {
    if (shown++ >= max_rows) {
      out += "  … (" + std::to_string(rows.size() - max_rows) + " more rows)\n";
      break;
    }
    out += "  ";
    for (std::size_t i = 0; i < r.size(); ++i) {
      out += r[i];
      if (i + 1 < r.size()) out += std::string(width[i] - r[i].size() + 2, ' ');
    }
    out += "\n";
  }
  return out;
}

void check_staleness(const fs::path& workspace_root) {
  fs::path dir = workspace_root / "manifests";
  if (!fs::exists(dir)) return;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    json m;
    try {
      m = json::parse(io::read_text(f.string()));
    } catch (...) {
      std::cerr << "warning: unreadable manifest " << f << "\n";
      continue;
    }
    auto check = [&](const char* key) {
      if (!m.contains(key)) return;
      for (const auto& [path, digest] : m.at(key).items()) {
        if (!io::file_exists(path)) continue;
        std::string now = io::file_digest_hex(path);
        if (digest.is_string() && digest.get<std::string>() != "absent" &&
            now != digest.get<std::string>())
          std::cerr << "warning: " << path << " changed since stage "
                    << m.value("stage", std::string("?")) << " ran\n";
      }
    };
    check("inputs");
    check("outputs");
  }
}

}  // namespace

void run_report(const WorkspaceConfig& cfg, const RunFlags& flags,
                const fs::path& workspace_root, const fs::path& out_path) {
  auto start = std::chrono::steady_clock::now();
  check_overwrite(out_path, flags.force);
  if (!fs::exists(workspace_root))
    throw DataError("workspace root does not exist: " + workspace_root.string());
  check_staleness(workspace_root);

  auto find_files = [&](std::string_view prefix, std::string_view suffix) {
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(workspace_root)) {
      if (!e.is_regular_file()) continue;
      std::string name = e.path().filename().string();
      if (name.size() >= prefix.size() + suffix.size() &&
          name.compare(0, prefix.size(), prefix) == 0 &&
          name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
        found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    return found;
  };

  std::string out;
  out += "community shift workspace report\n";
  out += "================================\n";
  std::size_t sections = 0;

  fs::path store_path = workspace_root / "store.cstore";
  if (io::file_exists(store_path.string())) {
    corpus::CorpusStore store = corpus::CorpusStore::load(store_path.string());
    out += "\n[corpus]\n";
    for (std::size_t c = 0; c < store.community_count(); ++c) {
      const auto& comm = store.community(c);
      out += "  " + comm.name +
             (comm.kind == corpus::CommunityKind::global ? " (global)" : "") + ": " +
             std::to_string(store.total_tokens(c)) + " tokens, " +
             std::to_string(store.documents(c).size()) + " documents, " +
             std::to_string(store.author_count(c)) + " authors\n";
    }
    ++sections;
  }

  for (const auto& p : find_files("shift_", ".tsv")) {
    shiftindex::ShiftTable table = shiftindex::read_tsv(p.string());
    std::string domain = p.stem().string().substr(6);
    out += "\n[domain " + domain + "]\n";
    out += "  communities: ";
    for (std::size_t i = 0; i < table.communities.size(); ++i) {
      if (i) out += ", ";
      out += table.communities[i];
    }
    out += "\n";
    auto digest_column = [&](const std::string& column, const std::string& label) {
      const auto& st = table.stats(column);
      out += "  " + label + ": n=" + std::to_string(table.words.size()) +
             " mean=" + io::fixed6(st.mean) + " sd=" + io::fixed6(st.stddev) + "\n";
      std::size_t k = std::min<std::size_t>(10, table.words.size());
      auto top = shiftindex::select_words(table, column,
                                          shiftindex::SelectionMode::topk_shift, k);
      out += "    top words:";
      const auto& values = table.column(column);
      for (const auto& w : top.words) {
        auto it = std::find(table.words.begin(), table.words.end(), w);
        std::size_t idx = static_cast<std::size_t>(it - table.words.begin());
        out += " " + w + "(" + io::fixed6(values[idx]) + ")";
      }
      out += "\n";
    };
    digest_column("dsi", "domain shift (dsi)");
    for (const auto& c : table.communities)
      digest_column("csi_" + c, "community shift (csi_" + c + ")");
    ++sections;
  }

  for (const auto& p : find_files("features_", ".tsv")) {
    auto rows = io::read_tsv(p.string());
    out += "\n[features " + p.stem().string().substr(9) + "]\n";
    out += "  " + std::to_string(rows.size() > 0 ? rows.size() - 1 : 0) + " rows\n";
    ++sections;
  }

  for (const auto& p : find_files("contrast_", ".tsv")) {
    out += "\n[" + p.stem().string() + "]\n";
    out += render_tsv_block(p);
    ++sections;
  }

  for (const auto& p : find_files("lmeval_", ".tsv")) {
    out += "\n[substitution " + p.stem().string().substr(7) + "]\n";
    out += render_tsv_block(p);
    ++sections;
  }

  if (sections == 0) throw DataError("workspace has no artifacts to report on");
  io::atomic_write_text(out_path.string(), out);
  note(flags, "report with " + std::to_string(sections) + " sections");

  json params{{"workspace", workspace_root.string()}};
  write_manifest(workspace_root, "report", {}, params.dump(), {out_path},
                 elapsed_seconds(start));
  (void)cfg;
}

}  // namespace commshift::workspace
