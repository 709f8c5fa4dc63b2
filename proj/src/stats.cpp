#include "commshift/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "commshift/error.hpp"
#include "commshift/io.hpp"

namespace commshift::stats {

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_var(std::span<const double> v, double mean) {
  double acc = 0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size() - 1);
}

double pooled_sd(std::span<const double> x, std::span<const double> y) {
  double mx = mean_of(x), my = mean_of(y);
  double vx = sample_var(x, mx), vy = sample_var(y, my);
  double df = static_cast<double>(x.size() + y.size() - 2);
  return std::sqrt(((x.size() - 1) * vx + (y.size() - 1) * vy) / df);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

std::string stars_for(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

TestResult ttest_ind(std::span<const double> x, std::span<const double> y, bool welch) {
  if (x.size() < 2 || y.size() < 2)
    throw DataError("t-test needs at least two values per group");
  double mx = mean_of(x), my = mean_of(y);
  double vx = sample_var(x, mx), vy = sample_var(y, my);
  double n1 = static_cast<double>(x.size()), n2 = static_cast<double>(y.size());

  double se, df;
  if (welch) {
    double a = vx / n1, b = vy / n2;
    se = std::sqrt(a + b);
    if (se == 0.0) throw DataError("t-test undefined: zero variance in both groups");
    df = (a + b) * (a + b) / (a * a / (n1 - 1) + b * b / (n2 - 1));
  } else {
    df = n1 + n2 - 2;
    double sp2 = ((n1 - 1) * vx + (n2 - 1) * vy) / df;
    if (sp2 == 0.0) throw DataError("t-test undefined: zero pooled variance");
    se = std::sqrt(sp2 * (1.0 / n1 + 1.0 / n2));
  }

  TestResult r;
  r.n1 = x.size();
  r.n2 = y.size();
  r.statistic = (mx - my) / se;
  boost::math::students_t dist(df);
  r.p_value = 2.0 * boost::math::cdf(dist, -std::abs(r.statistic));
  if (r.p_value > 1.0) r.p_value = 1.0;
  double sp = pooled_sd(x, y);
  if (sp > 0.0) r.effect_size = std::abs(mx - my) / sp;
  r.stars = stars_for(r.p_value);
  return r;
}

double cohens_d(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 2 || y.size() < 2)
    throw DataError("effect size needs at least two values per group");
  double sp = pooled_sd(x, y);
  if (sp == 0.0) throw DataError("effect size undefined: zero pooled sd");
  return std::abs(mean_of(x) - mean_of(y)) / sp;
}

TestResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> pairs) {
  std::vector<double> diffs;
  for (const auto& [a, b] : pairs) {
    double d = a - b;
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw DataError("signed-rank test undefined: all differences zero");
  std::size_t n = diffs.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(diffs[a]) < std::abs(diffs[b]);
  });

  std::vector<double> ranks(n);
  std::vector<double> tie_sizes;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && std::abs(diffs[order[j]]) == std::abs(diffs[order[i]])) ++j;
    double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    tie_sizes.push_back(static_cast<double>(j - i));
    i = j;
  }

  double w_plus = 0, w_minus = 0;
  for (std::size_t i = 0; i < n; ++i)
    (diffs[i] > 0 ? w_plus : w_minus) += ranks[i];
  double total = 0.5 * static_cast<double>(n) * static_cast<double>(n + 1);
  double w = std::min(w_plus, w_minus);

  TestResult r;
  r.n1 = pairs.size();
  r.n2 = n;
  r.statistic = w;

  constexpr double eps = 1e-9;
  if (n <= 15) {
    // exact null distribution of W+ over every sign assignment
    std::uint64_t count = 0;
    std::uint64_t masks = std::uint64_t{1} << n;
    for (std::uint64_t m = 0; m < masks; ++m) {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (m & (std::uint64_t{1} << i)) s += ranks[i];
      if (s <= w + eps || s >= total - w - eps) ++count;
    }
    r.p_value = std::min(1.0, static_cast<double>(count) / static_cast<double>(masks));
  } else {
    double mu = total / 2.0;
    double var = static_cast<double>(n) * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    for (double t : tie_sizes) var -= (t * t * t - t) / 48.0;
    if (var <= 0.0) throw DataError("signed-rank test undefined: degenerate ranks");
    double z = (w - mu + 0.5) / std::sqrt(var);
    r.p_value = std::min(1.0, 2.0 * normal_cdf(z));
  }
  r.stars = stars_for(r.p_value);
  return r;
}

ContrastReport feature_contrast(const std::vector<std::string>& shift_words,
                                const std::vector<std::string>& noshift_words,
                                const lexfeatures::FeatureTable& features) {
  if (shift_words.empty()) throw DataError("empty shift group");
  if (noshift_words.empty()) throw DataError("empty no-shift group");
  for (const auto& w : shift_words)
    if (std::find(noshift_words.begin(), noshift_words.end(), w) != noshift_words.end())
      throw DataError("groups overlap on word " + w);

  ContrastReport report;
  report.shift_words = shift_words;
  report.noshift_words = noshift_words;

  struct Extractor {
    const char* name;
    double (*get)(const lexfeatures::FeatureRow&);
  };
  const Extractor extractors[] = {
      {"freq", [](const lexfeatures::FeatureRow& r) { return r.freq; }},
      {"pro", [](const lexfeatures::FeatureRow& r) { return r.pro; }},
      {"spe", [](const lexfeatures::FeatureRow& r) { return r.spe; }},
      {"dis", [](const lexfeatures::FeatureRow& r) { return r.dis; }},
  };

  for (const auto& ex : extractors) {
    ContrastRow row;
    row.feature = ex.name;
    try {
      auto collect = [&](const std::vector<std::string>& words) {
        std::vector<double> out;
        for (const auto& w : words) {
          const lexfeatures::FeatureRow* r = features.find(w);
          if (!r) throw DataError("word " + w + " absent from feature table");
          out.push_back(ex.get(*r));
        }
        return out;
      };
      std::vector<double> a = collect(shift_words);
      std::vector<double> b = collect(noshift_words);
      row.result = ttest_ind(a, b);
    } catch (const Error& e) {
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_contrast_tsv(const ContrastReport& report, const std::string& path) {
  io::TsvWriter w(path);
  for (const char* h : {"feature", "n_shift", "n_noshift", "t", "p_value", "d", "stars",
                        "error"})
    w.cell(h);
  w.endrow();
  for (const auto& row : report.rows) {
    w.cell(row.feature);
    if (row.result) {
      const TestResult& r = *row.result;
      w.cell(static_cast<std::uint64_t>(r.n1));
      w.cell(static_cast<std::uint64_t>(r.n2));
      w.cell(r.statistic);
      w.cell(r.p_value);
      w.cell(r.effect_size ? *r.effect_size : 0.0);
      w.cell(r.stars);
      w.cell("");
    } else {
      w.cell(std::uint64_t{0});
      w.cell(std::uint64_t{0});
      w.cell("");
      w.cell("");
      w.cell("");
      w.cell("");
      w.cell(row.error);
    }
    w.endrow();
  }
  w.finish();
}

}  // namespace commshift::stats
