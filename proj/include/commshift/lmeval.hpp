#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "commshift/corpus.hpp"
#include "commshift/lm_network.hpp"
#include "commshift/stats.hpp"
#include "commshift/vectorspace.hpp"

namespace commshift::lmeval {

struct LMConfig {
  std::uint32_t layers = 2;
  std::uint32_t hidden_size = 200;  // must equal the embedding dimension
  std::uint32_t epochs = 40;
  float adam_lr = 1e-3f;
  float dropout = 0.2f;
  std::uint32_t batch_size = 20;
  std::uint32_t bptt = 35;
  float clip_norm = 0.25f;
  std::uint32_t eval_batch_size = 10;
  std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 1;
};

// document indices of one community, disjoint, shuffled by a seed derived
// from (seed, community) so any stage can recompute the same split
struct Split {
  std::vector<std::uint32_t> train, valid, test;
};

Split split_documents(const corpus::CorpusStore& store, std::string_view community,
                      std::array<double, 3> ratios, std::uint64_t seed);

// recurrent language model over one community's vocabulary slice; the input
// embedding is frozen to the community-composed vectors of a trained space,
// with extra rows for unknown and end-of-document tokens
class LanguageModel {
 public:
  static constexpr std::uint32_t kVersion = 1;

  LanguageModel() = default;

  const std::string& community() const { return community_; }
  std::uint32_t vocab_size() const { return static_cast<std::uint32_t>(words_.size()); }
  std::uint32_t unk_id() const { return vocab_size(); }
  std::uint32_t eos_id() const { return vocab_size() + 1; }
  std::uint32_t dim() const { return dim_; }
  const LMConfig& config() const { return config_; }
  const std::vector<std::string>& words() const { return words_; }
  const LmNetwork<float>& network() const { return net_; }

  // token -> model id, unknown words map to unk_id()
  std::uint32_t token_id(std::string_view word) const;
  // strict lookup: unknown word -> nullopt
  std::optional<std::uint32_t> known_id(std::string_view word) const;

  void save(const std::filesystem::path& path) const;
  static LanguageModel load(const std::filesystem::path& path);

  friend LanguageModel train_lm(const corpus::CorpusStore&,
                                const vectorspace::EmbeddingSpace&, std::string_view,
                                const LMConfig&, std::vector<struct EpochLog>*);

 private:
  std::string community_;
  std::vector<std::string> words_;
  std::map<std::string, std::uint32_t, std::less<>> index_;
  std::uint32_t dim_ = 0;
  LMConfig config_;
  LmNetwork<float> net_{0, 0, 0, 0};

  void rebuild_index();
};

struct EpochLog {
  std::uint32_t epoch = 0;
  double train_loss = 0;
  double valid_perplexity = 0;
};

// trains on the community's train split, keeps the epoch with best validation
// perplexity; diverging loss raises DataError
LanguageModel train_lm(const corpus::CorpusStore& store,
                       const vectorspace::EmbeddingSpace& space,
                       std::string_view community, const LMConfig& config,
                       std::vector<EpochLog>* log = nullptr);

// perplexity of the model over the successors of `word` in the test split of
// `community`. Default probes each occurrence with a single step from a reset
// state; carry_context instead runs full documents with the (possibly
// overridden) embedding in place. `override_embedding`, when non-null, must
// point at dim() floats replacing the word's input vector.
double target_perplexity(const LanguageModel& lm, const corpus::CorpusStore& store,
                         std::string_view community, std::string_view word,
                         const float* override_embedding = nullptr,
                         bool carry_context = false);

// relative perplexity change; ppl_train must be positive
double ppl_change(double ppl_train, double ppl_alt);

// one table row: a word group evaluated either across member language models
// (domain_row) or on the global model against one community's vectors
struct SubstitutionRowSpec {
  std::string label;
  bool domain_row = false;
  std::string community;             // community rows: the focus community
  std::vector<std::string> members;  // the domain's member communities
  std::vector<std::string> words;
};

struct SubstitutionRowResult {
  std::string label;
  std::size_t n_words = 0;
  std::size_t n_pairs = 0;
  double median_to_members = 0;  // substituting sibling-community vectors
  double median_to_focus = 0;    // substituting the focus vector (global or community)
  std::string focus;
  std::optional<stats::TestResult> wilcoxon;  // absent when pairs < 6 or degenerate
  std::vector<std::string> dropped;           // "word@community" absent from test split
};

struct SubstitutionReport {
  std::vector<SubstitutionRowResult> rows;
  std::vector<std::string> warnings;
};

// runs the embedding-substitution probe. `models` maps community name to a
// trained model and must cover the global community plus every domain member
// named by a row spec.
SubstitutionReport substitution_experiment(
    const vectorspace::EmbeddingSpace& space, const corpus::CorpusStore& store,
    const std::map<std::string, LanguageModel>& models,
    const std::vector<SubstitutionRowSpec>& rows, bool carry_context = false);

void write_substitution_tsv(const SubstitutionReport& report,
                            const std::filesystem::path& path);

}  // namespace commshift::lmeval
