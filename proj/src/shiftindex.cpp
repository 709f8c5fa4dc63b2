#include "commshift/shiftindex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "commshift/error.hpp"
#include "commshift/io.hpp"

namespace commshift::shiftindex {

namespace {

std::vector<std::size_t> resolve_set(const vectorspace::EmbeddingSpace& space,
                                     const std::vector<std::string>& names) {
  if (names.empty()) throw DataError("community set must be nonempty");
  std::vector<std::size_t> out;
  out.reserve(names.size());
  for (const auto& n : names) {
    auto c = space.find_community(n);
    if (!c) throw DataError("unknown community: " + n);
    out.push_back(*c);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_sd(std::span<const double> v, double mean) {
  double acc = 0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

std::vector<std::string> member_names(const vectorspace::EmbeddingSpace& space) {
  std::vector<std::string> out;
  for (std::size_t i : space.member_indices()) out.push_back(space.communities()[i].name);
  return out;
}

ColumnStats column_stats(std::span<const double> v) {
  double m = mean_of(v);
  return {m, population_sd(v, m)};
}

}  // namespace

std::vector<double> sim_multiset(const vectorspace::EmbeddingSpace& space,
                                 std::string_view word, const std::vector<std::string>& a,
                                 const std::vector<std::string>& b) {
  auto wid = space.vocab().id(word);
  if (!wid) throw DataError("word not in vocabulary: " + std::string(word));
  std::vector<std::size_t> sa = resolve_set(space, a);
  std::vector<std::size_t> sb = resolve_set(space, b);

  std::vector<double> out;
  if (sa == sb) {
    for (std::size_t i = 0; i < sa.size(); ++i)
      for (std::size_t j = i + 1; j < sa.size(); ++j)
        out.push_back(vectorspace::cosine(space.vector(*wid, sa[i]),
                                          space.vector(*wid, sa[j])));
  } else {
    for (std::size_t ca : sa)
      for (std::size_t cb : sb) {
        if (ca == cb) continue;
        out.push_back(
            vectorspace::cosine(space.vector(*wid, ca), space.vector(*wid, cb)));
      }
  }
  return out;
}

double index_value(std::span<const double> s, std::span<const double> s_prime) {
  if (s.empty() || s_prime.empty()) throw DataError("index of an empty multiset");
  double ms = mean_of(s);
  double mp = mean_of(s_prime);
  return (ms - population_sd(s, ms)) - (mp + population_sd(s_prime, mp));
}

double dsi(const vectorspace::EmbeddingSpace& space, std::string_view word,
           const std::vector<std::string>& domain) {
  if (domain.size() < 2) throw DataError("dsi needs at least two communities");
  std::string global = space.communities()[space.global_index()].name;
  std::vector<double> within = sim_multiset(space, word, domain, domain);
  std::vector<double> to_global = sim_multiset(space, word, domain, {global});
  return index_value(within, to_global);
}

double csi(const vectorspace::EmbeddingSpace& space, std::string_view word,
           std::string_view community, const std::vector<std::string>& domain) {
  if (domain.size() < 2) throw DataError("csi needs at least two communities");
  std::vector<std::string> rest;
  bool found = false;
  for (const auto& c : domain) {
    if (c == community) {
      found = true;
    } else {
      rest.push_back(c);
    }
  }
  if (!found)
    throw DataError("community " + std::string(community) + " is not in the domain");
  std::string global = space.communities()[space.global_index()].name;
  std::vector<double> siblings = sim_multiset(space, word, rest, {global});
  std::vector<double> own =
      sim_multiset(space, word, {std::string(community)}, {global});
  return index_value(siblings, own);
}

std::vector<std::string> ShiftTable::column_names() const {
  std::vector<std::string> out{"dsi"};
  for (const auto& c : communities) out.push_back("csi_" + c);
  return out;
}

const std::vector<double>& ShiftTable::column(std::string_view name) const {
  if (name == "dsi") return dsi_values;
  for (std::size_t i = 0; i < communities.size(); ++i)
    if (name == "csi_" + communities[i]) return csi_values[i];
  throw DataError("no such column: " + std::string(name));
}

const ColumnStats& ShiftTable::stats(std::string_view name) const {
  if (name == "dsi") return dsi_stats;
  for (std::size_t i = 0; i < communities.size(); ++i)
    if (name == "csi_" + communities[i]) return csi_stats[i];
  throw DataError("no such column: " + std::string(name));
}

ShiftTable shift_table(const vectorspace::EmbeddingSpace& space, std::string_view domain) {
  ShiftTable t;
  t.domain = domain;
  t.communities = member_names(space);
  if (t.communities.size() < 2)
    throw DataError("shift table needs at least two member communities");
  space.global_index();  // fail early when no global table exists

  std::size_t v = space.vocab().size();
  t.words.resize(v);
  t.dsi_values.resize(v);
  t.csi_values.assign(t.communities.size(), std::vector<double>(v));
  for (std::uint32_t w = 0; w < v; ++w) {
    t.words[w] = space.vocab().word(w);
    t.dsi_values[w] = dsi(space, t.words[w], t.communities);
    for (std::size_t c = 0; c < t.communities.size(); ++c)
      t.csi_values[c][w] = csi(space, t.words[w], t.communities[c], t.communities);
  }
  t.dsi_stats = column_stats(t.dsi_values);
  t.csi_stats.resize(t.communities.size());
  for (std::size_t c = 0; c < t.communities.size(); ++c)
    t.csi_stats[c] = column_stats(t.csi_values[c]);
  return t;
}

WordSetSelection select_words(const ShiftTable& table, std::string_view column,
                              SelectionMode mode, std::size_t k) {
  const std::vector<double>& values = table.column(column);
  WordSetSelection sel;
  sel.mode = mode;
  sel.column = column;
  sel.k = k;

  std::vector<std::uint32_t> ids(values.size());
  std::iota(ids.begin(), ids.end(), 0u);

  switch (mode) {
    case SelectionMode::topk_shift: {
      if (values.size() < k)
        throw DataError("top-k selection needs " + std::to_string(k) + " words, have " +
                        std::to_string(values.size()));
      std::sort(ids.begin(), ids.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
      });
      ids.resize(k);
      break;
    }
    case SelectionMode::bottomk_positive_noshift: {
      std::vector<std::uint32_t> pos;
      for (std::uint32_t i : ids)
        if (values[i] > 0.0) pos.push_back(i);
      if (pos.size() < k)
        throw DataError("bottom-k positive selection needs " + std::to_string(k) +
                        " strictly-positive words, have " + std::to_string(pos.size()));
      std::sort(pos.begin(), pos.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (values[a] != values[b]) return values[a] < values[b];
        return a < b;
      });
      pos.resize(k);
      ids = std::move(pos);
      break;
    }
    case SelectionMode::sigma2_shift: {
      const ColumnStats& st = table.stats(column);
      double cut = st.mean + 2.0 * st.stddev;
      std::vector<std::uint32_t> keep;
      for (std::uint32_t i : ids)
        if (values[i] >= cut) keep.push_back(i);
      ids = std::move(keep);
      break;
    }
    case SelectionMode::below_sigma1_noshift: {
      const ColumnStats& st = table.stats(column);
      double cut = st.mean + st.stddev;
      std::vector<std::uint32_t> keep;
      for (std::uint32_t i : ids)
        if (values[i] < cut) keep.push_back(i);
      ids = std::move(keep);
      break;
    }
  }
  sel.words.reserve(ids.size());
  for (std::uint32_t i : ids) sel.words.push_back(table.words[i]);
  return sel;
}

void write_tsv(const ShiftTable& table, const std::string& path) {
  io::TsvWriter w(path);
  w.cell("word");
  for (const auto& name : table.column_names()) w.cell(name);
  w.endrow();
  for (std::size_t i = 0; i < table.words.size(); ++i) {
    w.cell(table.words[i]);
    w.cell(table.dsi_values[i]);
    for (const auto& col : table.csi_values) w.cell(col[i]);
    w.endrow();
  }
  w.finish();
}

ShiftTable read_tsv(const std::string& path) {
  auto rows = io::read_tsv(path);
  if (rows.empty() || rows[0].size() < 2 || rows[0][0] != "word" || rows[0][1] != "dsi")
    throw DataError(path + ": not a shift table");
  ShiftTable t;
  for (std::size_t c = 2; c < rows[0].size(); ++c) {
    const std::string& h = rows[0][c];
    if (h.rfind("csi_", 0) != 0) throw DataError(path + ": unexpected column " + h);
    t.communities.push_back(h.substr(4));
  }
  t.csi_values.assign(t.communities.size(), {});
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != 2 + t.communities.size())
      throw DataError(path + ": ragged row " + std::to_string(r));
    t.words.push_back(row[0]);
    t.dsi_values.push_back(std::stod(row[1]));
    for (std::size_t c = 0; c < t.communities.size(); ++c)
      t.csi_values[c].push_back(std::stod(row[2 + c]));
  }
  if (t.words.empty()) throw DataError(path + ": empty shift table");
  t.dsi_stats = column_stats(t.dsi_values);
  t.csi_stats.resize(t.communities.size());
  for (std::size_t c = 0; c < t.communities.size(); ++c)
    t.csi_stats[c] = column_stats(t.csi_values[c]);
  return t;
}

void write_histogram_tsv(const ShiftTable& table, const std::string& path) {
  io::TsvWriter w(path);
  w.cell("column");
  for (int q = 0; q <= 10; ++q) w.cell("p" + std::to_string(q * 10));
  w.endrow();
  for (const auto& name : table.column_names()) {
    std::vector<double> v = table.column(name);
    std::sort(v.begin(), v.end());
    w.cell(name);
    for (int q = 0; q <= 10; ++q) {
      double pos = (v.size() - 1) * (q / 10.0);
      std::size_t lo = static_cast<std::size_t>(pos);
      std::size_t hi = std::min(lo + 1, v.size() - 1);
      double frac = pos - static_cast<double>(lo);
      w.cell(v[lo] + (v[hi] - v[lo]) * frac);
    }
    w.endrow();
  }
  w.finish();
}

}  // namespace commshift::shiftindex
