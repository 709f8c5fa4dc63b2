#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "commshift/lexfeatures.hpp"

namespace commshift::stats {

struct TestResult {
  double statistic = 0;
  double p_value = 1;
  std::optional<double> effect_size;  // Cohen's d where applicable
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::string stars;  // "", "*", "**", "***"
};

// "*" p<.05, "**" p<.01, "***" p<.001; exact boundaries take the weaker band
std::string stars_for(double p);

// Student's pooled-variance t (df = n1+n2-2), two-sided; welch switches to
// unpooled variances with Welch-Satterthwaite df
TestResult ttest_ind(std::span<const double> x, std::span<const double> y,
                     bool welch = false);

// |mean(x)-mean(y)| / pooled sample sd
double cohens_d(std::span<const double> x, std::span<const double> y);

// Zero differences dropped; average ranks on tied |d|; statistic min(W+, W-).
// Two-sided p: exact over all sign assignments for n <= 15, else normal
// approximation with continuity and tie corrections.
TestResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> pairs);

struct ContrastRow {
  std::string feature;  // freq, pro, spe, dis
  std::optional<TestResult> result;
  std::string error;  // set when the test could not run
};

struct ContrastReport {
  std::vector<std::string> shift_words;
  std::vector<std::string> noshift_words;
  std::vector<ContrastRow> rows;
};

// Table-3-style contrast: for each feature, shift-group values vs
// no-shift-group values via ttest_ind + cohens_d. A feature whose test cannot
// run yields an error row; the report always covers all four features.
ContrastReport feature_contrast(const std::vector<std::string>& shift_words,
                                const std::vector<std::string>& noshift_words,
                                const lexfeatures::FeatureTable& features);

void write_contrast_tsv(const ContrastReport& report, const std::string& path);

}  // namespace commshift::stats
