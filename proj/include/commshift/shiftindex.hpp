#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "commshift/vectorspace.hpp"

namespace commshift::shiftindex {

// Bag of pairwise cosines between a word's vectors across two community sets.
// For A == B (as sets) each unordered pair contributes once; otherwise every
// ordered (a, b) in A x B with a != b contributes.
std::vector<double> sim_multiset(const vectorspace::EmbeddingSpace& space,
                                 std::string_view word,
                                 const std::vector<std::string>& a,
                                 const std::vector<std::string>& b);

// I(S, S') = [mean(S) - sd(S)] - [mean(S') + sd(S')], population sd (divisor n)
double index_value(std::span<const double> s, std::span<const double> s_prime);

// I(Sim_{D,D}, Sim_{D,{g}}): within-domain agreement against drift from global
double dsi(const vectorspace::EmbeddingSpace& space, std::string_view word,
           const std::vector<std::string>& domain);

// I(Sim_{D\{c},{g}}, Sim_{{c},{g}}): c's drift from global relative to siblings
double csi(const vectorspace::EmbeddingSpace& space, std::string_view word,
           std::string_view community, const std::vector<std::string>& domain);

struct ColumnStats {
  double mean = 0;
  double stddev = 0;  // population
};

struct ShiftTable {
  std::string domain;
  std::vector<std::string> words;               // vocabulary order
  std::vector<double> dsi_values;               // per word
  std::vector<std::string> communities;         // member order
  std::vector<std::vector<double>> csi_values;  // [community][word]
  ColumnStats dsi_stats;
  std::vector<ColumnStats> csi_stats;

  // "dsi" or "csi_<community>"
  std::vector<std::string> column_names() const;
  const std::vector<double>& column(std::string_view name) const;
  const ColumnStats& stats(std::string_view name) const;
};

// dsi for every vocabulary word plus csi per (word, member community)
ShiftTable shift_table(const vectorspace::EmbeddingSpace& space, std::string_view domain);

enum class SelectionMode {
  topk_shift,                // k largest
  bottomk_positive_noshift,  // k smallest strictly-positive
  sigma2_shift,              // v >= mean + 2 sd
  below_sigma1_noshift,      // v < mean + 1 sd
};

struct WordSetSelection {
  SelectionMode mode;
  std::string column;
  std::size_t k = 0;  // topk/bottomk only
  std::vector<std::string> words;
};

// ties break by vocabulary id ascending; top/bottom modes error when fewer
// than k eligible words exist
WordSetSelection select_words(const ShiftTable& table, std::string_view column,
                              SelectionMode mode, std::size_t k = 0);

void write_tsv(const ShiftTable& table, const std::string& path);
ShiftTable read_tsv(const std::string& path);

// value deciles per column, for external plotting
void write_histogram_tsv(const ShiftTable& table, const std::string& path);

}  // namespace commshift::shiftindex
