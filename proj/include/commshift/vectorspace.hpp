#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "commshift/corpus.hpp"

namespace commshift::vectorspace {

struct TrainingConfig {
  std::uint32_t dim = 200;
  std::uint32_t window = 5;
  std::uint32_t negatives = 5;
  std::uint32_t epochs = 5;
  float learning_rate = 0.025f;
  float min_lr = 1e-5f;
  float l2_lambda = 1e-4f;       // penalty on deviation rows only
  float unigram_power = 0.75f;
  bool subsample_frequent = false;
  float subsample_threshold = 1e-3f;
  std::uint32_t threads = 1;     // >1 trades bit-exact reproducibility for speed
  std::uint64_t seed = 1;
};

// Joint embedding tables over one vocabulary: a main table shared by all
// communities plus one deviation table per community (the global community is
// just another table). The vector of word w in community c is
// main[w] + dev_c[w], composed on demand. A single context (output) table is
// shared across communities.
class EmbeddingSpace {
 public:
  EmbeddingSpace(corpus::Vocabulary vocab, std::vector<corpus::Community> communities,
                 const TrainingConfig& config);

  const corpus::Vocabulary& vocab() const { return vocab_; }
  std::uint32_t dim() const { return config_.dim; }
  const TrainingConfig& config() const { return config_; }
  const std::vector<corpus::Community>& communities() const { return communities_; }
  std::optional<std::size_t> find_community(std::string_view name) const;
  std::size_t global_index() const;
  std::vector<std::size_t> member_indices() const;

  std::span<const float> main_row(std::uint32_t word) const;
  std::span<const float> deviation_row(std::size_t community, std::uint32_t word) const;
  std::span<const float> context_row(std::uint32_t word) const;
  std::span<float> main_row(std::uint32_t word);
  std::span<float> deviation_row(std::size_t community, std::uint32_t word);
  std::span<float> context_row(std::uint32_t word);

  // composed vector main[w] + dev_c[w]
  std::vector<float> vector(std::uint32_t word, std::size_t community) const;
  std::vector<float> vector(std::string_view word, std::string_view community) const;

  void save(const std::string& path) const;
  static EmbeddingSpace load(const std::string& path);
  // writes word2vec text format: main.txt, dev_<c>.txt and composed_<c>.txt per community
  void export_text(const std::string& dir) const;

 private:
  corpus::Vocabulary vocab_;
  std::vector<corpus::Community> communities_;
  TrainingConfig config_;
  std::vector<float> main_;                // V x dim
  std::vector<std::vector<float>> dev_;    // per community, V x dim
  std::vector<float> ctx_;                 // V x dim
};

// angular similarity in [-1, 1]; zero-norm input is an error
double cosine(std::span<const float> a, std::span<const float> b);

struct Neighbor {
  std::string word;
  std::string community;
  double cosine;
};

// k nearest composed vectors to (word, community) among the scope communities
// (all communities when scope is empty), excluding the query pair itself.
// Ties break by vocabulary id, then by community order.
std::vector<Neighbor> nearest_neighbors(const EmbeddingSpace& space, std::string_view word,
                                        std::string_view community, std::size_t k,
                                        const std::vector<std::string>& scope = {});

// Skip-gram training over all communities of the store. Every SGNS update of a
// center word flows into both its main row and the touched community's
// deviation row; deviation rows shrink by l2_lambda at each touching update.
// The learning rate decays linearly over the total scheduled pair count.
EmbeddingSpace train(const corpus::CorpusStore& store, const corpus::Vocabulary& vocab,
                     const TrainingConfig& config);

}  // namespace commshift::vectorspace
