#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "commshift/corpus.hpp"

namespace commshift::lexfeatures {

// Counts for one bigram (u, v): how often the exact pair occurs, how often u
// opens any bigram, how often v closes any bigram, and the total bigram count.
struct BigramContingency {
  std::uint64_t joint = 0;
  std::uint64_t left_marginal = 0;
  std::uint64_t right_marginal = 0;
  std::uint64_t total = 0;
};

// Dunning's -2 log lambda over the 2x2 table, with 0*ln(0) := 0; always >= 0
double llr_bigram(const BigramContingency& ct);

enum class DisseminationVariant {
  camera_ready,  // (U^w/U) * (1 - relfreq)
  draft,         // (U^w/U) * (freq - 1); may go negative, kept for comparison only
};

struct FeatureOptions {
  DisseminationVariant variant = DisseminationVariant::camera_ready;
  std::uint64_t min_count = 1;  // scope-presence threshold for table rows
};

// A feature scope is one community inside its domain, or a whole domain.
// members always lists the domain's member communities (for a community scope
// the pool of siblings; for a domain scope the communities whose counts pool).
struct Scope {
  bool is_domain = false;
  std::string name;
  std::vector<std::string> members;

  static Scope community(std::string name, std::vector<std::string> domain_members);
  static Scope domain(std::string name, std::vector<std::string> domain_members);
  std::string label() const;  // "community:<name>" or "domain:<name>"
};

struct FeatureRow {
  std::string word;
  double freq = 0;     // log10 relative frequency, <= 0
  double pro = 0;      // count share inside the scope vs outside, in [0,1]
  double spe_raw = 0;  // best bigram llr containing the word
  double spe = 0;      // spe_raw min-max normalized over the scope, in [0,1]
  double dis = 0;      // author coverage damped by relative frequency
};

class FeatureTable {
 public:
  FeatureTable(Scope scope, std::vector<FeatureRow> rows);

  const Scope& scope() const { return scope_; }
  const std::vector<FeatureRow>& rows() const { return rows_; }
  const FeatureRow* find(std::string_view word) const;

  void write_tsv(const std::string& path) const;
  static FeatureTable read_tsv(const std::string& path);

 private:
  Scope scope_;
  std::vector<FeatureRow> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

// All four features for every word present in the scope with at least
// min_count pooled occurrences (so confined jargon keeps its Pro = 1 row even
// when it misses the shared training vocabulary).
FeatureTable feature_table(const corpus::CorpusStore& store, const Scope& scope,
                           const FeatureOptions& opts = {});

// single-word conveniences; each computes from the same definitions
double frequency(const corpus::CorpusStore& store, std::string_view w, const Scope& scope);
double prominence(const corpus::CorpusStore& store, std::string_view w, const Scope& scope);
double dissemination(const corpus::CorpusStore& store, std::string_view w, const Scope& scope,
                     DisseminationVariant variant = DisseminationVariant::camera_ready);
// (raw, normalized); normalization runs over the whole scope table
std::pair<double, double> specificity(const corpus::CorpusStore& store, std::string_view w,
                                      const Scope& scope);

}  // namespace commshift::lexfeatures
