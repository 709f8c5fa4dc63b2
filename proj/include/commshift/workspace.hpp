#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "commshift/corpus.hpp"
#include "commshift/lexfeatures.hpp"
#include "commshift/lmeval.hpp"
#include "commshift/vectorspace.hpp"

namespace commshift::workspace {

struct DomainDecl {
  std::string name;
  std::vector<std::string> members;
};

// one JSON config shared by every pipeline stage
struct WorkspaceConfig {
  std::vector<std::string> communities;  // member community names
  std::string global_name = "global";
  std::vector<DomainDecl> domains;
  std::uint64_t min_count = 10;
  bool lowercase = true;
  bool subsample_equalize = false;
  std::uint64_t subsample_tokens = 0;  // 0 = off; target tokens per community
  std::uint64_t seed = 1;
  vectorspace::TrainingConfig training;
  lmeval::LMConfig lm;
  lexfeatures::FeatureOptions features;
  std::uint32_t selection_k = 10;

  static WorkspaceConfig load(const std::filesystem::path& path);
  static WorkspaceConfig parse(const std::string& json_text);

  // member communities followed by the global one, with kinds set
  std::vector<corpus::Community> community_list() const;
  const DomainDecl& domain(std::string_view name) const;
  // the only domain; error when the config declares several
  const DomainDecl& sole_domain() const;
};

struct RunFlags {
  bool force = false;
  bool verbose = false;
  std::optional<std::uint64_t> seed;  // overrides the config seed
};

// refuses to clobber an existing output unless --force was given
void check_overwrite(const std::filesystem::path& out, bool force);

// content digest + wall time bookkeeping under <workspace>/manifests/<name>.json
void write_manifest(const std::filesystem::path& workspace_root, std::string_view name,
                    const std::vector<std::filesystem::path>& inputs,
                    const std::string& params_json,
                    const std::vector<std::filesystem::path>& outputs,
                    double wall_seconds);

void run_ingest(const WorkspaceConfig& cfg, const RunFlags& flags,
                const std::vector<std::string>& inputs,
                const std::filesystem::path& out_store,
                const std::filesystem::path& workspace_root);

void run_synth(const std::filesystem::path& scenario_path, const RunFlags& flags,
               const std::filesystem::path& out_jsonl,
               const std::filesystem::path& workspace_root);

void run_train(const WorkspaceConfig& cfg, const RunFlags& flags,
               const std::filesystem::path& store_path, std::string_view domain,
               const std::filesystem::path& out_space,
               const std::filesystem::path& workspace_root);

void run_shift(const WorkspaceConfig& cfg, const RunFlags& flags,
               const std::filesystem::path& space_path, std::string_view domain,
               const std::filesystem::path& out_tsv,
               const std::filesystem::path& workspace_root);

// scope_text: "<community>" or "domain:<name>"
void run_features(const WorkspaceConfig& cfg, const RunFlags& flags,
                  const std::filesystem::path& store_path, std::string_view scope_text,
                  const std::filesystem::path& out_tsv,
                  const std::filesystem::path& workspace_root);

void run_contrast(const WorkspaceConfig& cfg, const RunFlags& flags,
                  const std::filesystem::path& shift_tsv,
                  const std::filesystem::path& features_tsv, std::string_view column,
                  std::string_view mode,  // "topk" or "sigma"
                  const std::filesystem::path& out_tsv,
                  const std::filesystem::path& workspace_root);

void run_lm_train(const WorkspaceConfig& cfg, const RunFlags& flags,
                  const std::filesystem::path& store_path,
                  const std::filesystem::path& space_path, std::string_view community,
                  const std::filesystem::path& out_model,
                  const std::filesystem::path& workspace_root);

void run_lm_eval(const WorkspaceConfig& cfg, const RunFlags& flags,
                 const std::filesystem::path& models_dir,
                 const std::filesystem::path& shift_tsv,
                 const std::filesystem::path& store_path,
                 const std::filesystem::path& space_path,
                 const std::filesystem::path& out_tsv,
                 const std::filesystem::path& workspace_root);

// plain-text summary over every artifact found in the workspace; stale-digest
// warnings go to stderr so reruns stay byte-identical
void run_report(const WorkspaceConfig& cfg, const RunFlags& flags,
                const std::filesystem::path& workspace_root,
                const std::filesystem::path& out_path);

}  // namespace commshift::workspace
