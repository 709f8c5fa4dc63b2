#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commshift/error.hpp"
#include "commshift/workspace.hpp"

namespace fs = std::filesystem;
using commshift::workspace::RunFlags;
using commshift::workspace::WorkspaceConfig;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string workspace_root;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool force = false;
  bool verbose = false;

  RunFlags flags() const {
    RunFlags f;
    f.force = force;
    f.verbose = verbose;
    if (seed_set) f.seed = seed;
    return f;
  }

  fs::path root() const {
    return workspace_root.empty() ? fs::current_path() : fs::path(workspace_root);
  }

  WorkspaceConfig config() const {
    if (config_path.empty())
      throw commshift::UsageError("this stage needs --config <path>");
    return WorkspaceConfig::load(config_path);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"community-conditioned embedding pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  app.add_option("--config", g.config_path, "workspace config JSON")->envname("COMMSHIFT_CONFIG");
  app.add_option("--workspace", g.workspace_root,
                 "workspace root for manifests and the report")
      ->envname("COMMSHIFT_WORKSPACE");
  app.add_option("--seed", g.seed, "override the config seed")
      ->each([&](const std::string&) { g.seed_set = true; });
  app.add_flag("--force", g.force, "overwrite existing outputs");
  app.add_flag("--verbose", g.verbose, "progress notes on stderr");

  std::vector<std::string> in_inputs;
  std::string in_out;
  auto* c_ingest = app.add_subcommand("ingest", "tokenize JSONL records into a corpus store");
  c_ingest->add_option("--input", in_inputs, "JSONL input paths")->required()->expected(-1);
  c_ingest->add_option("--out", in_out, "store output path")->required();

  std::string sy_scenario, sy_out;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic corpus with planted shifts");
  c_synth->add_option("--scenario", sy_scenario, "scenario JSON path")->required();
  c_synth->add_option("--out", sy_out, "JSONL output path")->required();

  std::string tr_store, tr_domain, tr_out;
  auto* c_train = app.add_subcommand("train", "train community-conditioned embeddings");
  c_train->add_option("--store", tr_store, "corpus store path")->required();
  c_train->add_option("--domain", tr_domain, "domain to train (default: sole domain)");
  c_train->add_option("--out", tr_out, "embedding space output path")->required();

  std::string sh_space, sh_domain, sh_out;
  auto* c_shift = app.add_subcommand("shift", "compute shift indices over a domain");
  c_shift->add_option("--space", sh_space, "embedding space path")->required();
  c_shift->add_option("--domain", sh_domain, "domain name (default: sole domain)");
  c_shift->add_option("--out", sh_out, "shift table TSV path")->required();

  std::string fe_store, fe_scope, fe_out;
  auto* c_features = app.add_subcommand("features", "lexical feature table for one scope");
  c_features->add_option("--store", fe_store, "corpus store path")->required();
  c_features->add_option("--scope", fe_scope, "community name or domain:<name>")->required();
  c_features->add_option("--out", fe_out, "feature TSV path")->required();

  std::string co_shift, co_features, co_column, co_mode = "topk", co_out;
  auto* c_contrast = app.add_subcommand("contrast", "shift vs no-shift feature contrast");
  c_contrast->add_option("--shift-table", co_shift, "shift table TSV")->required();
  c_contrast->add_option("--features", co_features, "feature table TSV")->required();
  c_contrast->add_option("--column", co_column, "dsi or csi_<community>")->required();
  c_contrast->add_option("--mode", co_mode, "selection mode: topk or sigma");
  c_contrast->add_option("--out", co_out, "contrast TSV path")->required();

  std::string lt_store, lt_space, lt_community, lt_out;
  auto* c_lmtrain = app.add_subcommand("lm-train", "train one community's language model");
  c_lmtrain->add_option("--store", lt_store, "corpus store path")->required();
  c_lmtrain->add_option("--space", lt_space, "embedding space path")->required();
  c_lmtrain->add_option("--community", lt_community, "community to model")->required();
  c_lmtrain->add_option("--out", lt_out, "model output path")->required();

  std::string le_models, le_shift, le_store, le_space, le_out;
  auto* c_lmeval = app.add_subcommand("lm-eval", "embedding substitution experiment");
  c_lmeval->add_option("--models", le_models, "directory of <community>.clm models")->required();
  c_lmeval->add_option("--shift-table", le_shift, "shift table TSV")->required();
  c_lmeval->add_option("--store", le_store, "corpus store path")->required();
  c_lmeval->add_option("--space", le_space, "embedding space path")->required();
  c_lmeval->add_option("--out", le_out, "substitution TSV path")->required();

  std::string re_out;
  auto* c_report = app.add_subcommand("report", "summarize every artifact in the workspace");
  c_report->add_option("--out", re_out, "report path (default <workspace>/report.txt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    RunFlags flags = g.flags();
    if (c_ingest->parsed()) {
      commshift::workspace::run_ingest(g.config(), flags, in_inputs, in_out, g.root());
    } else if (c_synth->parsed()) {
      commshift::workspace::run_synth(sy_scenario, flags, sy_out, g.root());
    } else if (c_train->parsed()) {
      commshift::workspace::run_train(g.config(), flags, tr_store, tr_domain, tr_out,
                                      g.root());
    } else if (c_shift->parsed()) {
      commshift::workspace::run_shift(g.config(), flags, sh_space, sh_domain, sh_out,
                                      g.root());
    } else if (c_features->parsed()) {
      commshift::workspace::run_features(g.config(), flags, fe_store, fe_scope, fe_out,
                                         g.root());
    } else if (c_contrast->parsed()) {
      commshift::workspace::run_contrast(g.config(), flags, co_shift, co_features,
                                         co_column, co_mode, co_out, g.root());
    } else if (c_lmtrain->parsed()) {
      commshift::workspace::run_lm_train(g.config(), flags, lt_store, lt_space,
                                         lt_community, lt_out, g.root());
    } else if (c_lmeval->parsed()) {
      commshift::workspace::run_lm_eval(g.config(), flags, le_models, le_shift, le_store,
                                        le_space, le_out, g.root());
    } else if (c_report->parsed()) {
      fs::path out = re_out.empty() ? g.root() / "report.txt" : fs::path(re_out);
      WorkspaceConfig cfg =
          g.config_path.empty() ? WorkspaceConfig{} : g.config();
      commshift::workspace::run_report(cfg, flags, g.root(), out);
    }
  } catch (const commshift::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
