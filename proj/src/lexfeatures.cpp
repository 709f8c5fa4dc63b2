#include "commshift/lexfeatures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "commshift/error.hpp"
#include "commshift/io.hpp"

namespace commshift::lexfeatures {

namespace {

double xlogx_ratio(double k, double e) {
  if (k == 0.0) return 0.0;
  return k * std::log(k / e);
}

struct ScopeCounts {
  std::vector<std::size_t> comms;           // store indices of the scope's own communities
  std::vector<std::uint64_t> word_counts;   // pooled N^w over comms
  std::uint64_t total_tokens = 0;           // pooled N
  std::vector<std::uint64_t> author_users;  // pooled distinct named authors per word
  std::uint64_t author_count = 0;           // pooled distinct named authors
  std::vector<std::uint64_t> outside;       // community: sibling counts; domain: global counts
};

std::size_t need_community(const corpus::CorpusStore& store, const std::string& name) {
  auto c = store.find_community(name);
  if (!c) throw DataError("unknown community: " + name);
  return *c;
}

ScopeCounts scope_counts(const corpus::CorpusStore& store, const Scope& scope) {
  ScopeCounts sc;
  std::vector<std::size_t> member_idx;
  for (const auto& m : scope.members) member_idx.push_back(need_community(store, m));

  if (scope.is_domain) {
    sc.comms = member_idx;
  } else {
    std::size_t own = need_community(store, scope.name);
    if (std::find(member_idx.begin(), member_idx.end(), own) == member_idx.end())
      throw DataError("community " + scope.name + " is not among the domain members");
    sc.comms = {own};
  }

  std::size_t nw = store.distinct_words();
  sc.word_counts.assign(nw, 0);
  for (std::size_t c : sc.comms) {
    sc.total_tokens += store.total_tokens(c);
    for (std::size_t w = 0; w < nw; ++w)
      sc.word_counts[w] += store.occurrences(static_cast<corpus::WordId>(w), c);
  }

  // outside-counts for prominence
  sc.outside.assign(nw, 0);
  if (scope.is_domain) {
    std::size_t g = store.global_index();
    for (std::size_t w = 0; w < nw; ++w)
      sc.outside[w] = store.occurrences(static_cast<corpus::WordId>(w), g);
  } else {
    for (std::size_t c : member_idx) {
      if (c == sc.comms[0]) continue;
      for (std::size_t w = 0; w < nw; ++w)
        sc.outside[w] += store.occurrences(static_cast<corpus::WordId>(w), c);
    }
  }

  // author statistics; a single community reads straight off the store,
  // a domain pools authors so multi-community authors count once
  if (sc.comms.size() == 1) {
    std::size_t c = sc.comms[0];
    sc.author_count = store.author_count(c);
    sc.author_users.assign(nw, 0);
    for (std::size_t w = 0; w < nw; ++w)
      sc.author_users[w] = store.author_users(static_cast<corpus::WordId>(w), c);
  } else {
    sc.author_users.assign(nw, 0);
    std::vector<const corpus::Document*> docs;
    for (std::size_t c : sc.comms)
      for (const auto& d : store.documents(c))
        if (d.author != corpus::kNoAuthor) docs.push_back(&d);
    std::stable_sort(docs.begin(), docs.end(), [](const corpus::Document* a,
                                                  const corpus::Document* b) {
      return a->author < b->author;
    });
    std::vector<std::uint64_t> stamp(nw, ~std::uint64_t{0});
    std::uint64_t cur = 0;
    std::uint32_t cur_author = corpus::kNoAuthor;
    for (const corpus::Document* d : docs) {
      if (cur == 0 || d->author != cur_author) {
        cur_author = d->author;
        ++cur;
        ++sc.author_count;
      }
      for (corpus::WordId w : d->tokens) {
        if (stamp[w] != cur) {
          stamp[w] = cur;
          sc.author_users[w] += 1;
        }
      }
    }
  }
  return sc;
}

// adjacency index over the scope's documents
struct BigramIndex {
  std::unordered_map<std::uint64_t, std::uint64_t> pair_counts;  // (u<<32)|v
  std::vector<std::uint64_t> left;   // bigrams opened by u
  std::vector<std::uint64_t> right;  // bigrams closed by v
  std::uint64_t total = 0;
};

BigramIndex build_bigrams(const corpus::CorpusStore& store,
                          const std::vector<std::size_t>& comms) {
  BigramIndex ix;
  ix.left.assign(store.distinct_words(), 0);
  ix.right.assign(store.distinct_words(), 0);
  for (std::size_t c : comms) {
    for (const auto& d : store.documents(c)) {
      for (std::size_t i = 0; i + 1 < d.tokens.size(); ++i) {
        std::uint64_t key = (std::uint64_t{d.tokens[i]} << 32) | d.tokens[i + 1];
        ix.pair_counts[key] += 1;
        ix.left[d.tokens[i]] += 1;
        ix.right[d.tokens[i + 1]] += 1;
        ix.total += 1;
      }
    }
  }
  return ix;
}

double dis_value(std::uint64_t users, std::uint64_t user_total, std::uint64_t n,
                 std::uint64_t total, double freq, DisseminationVariant variant) {
  if (user_total == 0) throw DataError("dissemination undefined: no named authors in scope");
  double coverage = static_cast<double>(users) / static_cast<double>(user_total);
  if (variant == DisseminationVariant::camera_ready) {
    double relfreq = static_cast<double>(n) / static_cast<double>(total);
    return coverage * (1.0 - relfreq);
  }
  return coverage * (freq - 1.0);
}

}  // namespace

double llr_bigram(const BigramContingency& ct) {
  if (ct.joint > ct.left_marginal || ct.joint > ct.right_marginal ||
      ct.left_marginal > ct.total || ct.right_marginal > ct.total ||
      ct.left_marginal + ct.right_marginal > ct.total + ct.joint)
    throw DataError("inconsistent bigram contingency");
  if (ct.total == 0) return 0.0;
  double n = static_cast<double>(ct.total);
  double k11 = static_cast<double>(ct.joint);
  double k12 = static_cast<double>(ct.left_marginal - ct.joint);
  double k21 = static_cast<double>(ct.right_marginal - ct.joint);
  double k22 = n - k11 - k12 - k21;
  double r1 = k11 + k12, r2 = k21 + k22;
  double c1 = k11 + k21, c2 = k12 + k22;
  double v = 2.0 * (xlogx_ratio(k11, r1 * c1 / n) + xlogx_ratio(k12, r1 * c2 / n) +
                    xlogx_ratio(k21, r2 * c1 / n) + xlogx_ratio(k22, r2 * c2 / n));
  return v < 0.0 ? 0.0 : v;
}

Scope Scope::community(std::string name, std::vector<std::string> domain_members) {
  Scope s;
  s.is_domain = false;
  s.name = std::move(name);
  s.members = std::move(domain_members);
  return s;
}

Scope Scope::domain(std::string name, std::vector<std::string> domain_members) {
  Scope s;
  s.is_domain = true;
  s.name = std::move(name);
  s.members = std::move(domain_members);
  return s;
}

std::string Scope::label() const {
  return (is_domain ? "domain:" : "community:") + name;
}

FeatureTable::FeatureTable(Scope scope, std::vector<FeatureRow> rows)
    : scope_(std::move(scope)), rows_(std::move(rows)) {
  for (std::size_t i = 0; i < rows_.size(); ++i) index_.emplace(rows_[i].word, i);
}

const FeatureRow* FeatureTable::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return nullptr;
  return &rows_[it->second];
}

FeatureTable feature_table(const corpus::CorpusStore& store, const Scope& scope,
                           const FeatureOptions& opts) {
  ScopeCounts sc = scope_counts(store, scope);
  std::size_t nw = store.distinct_words();

  std::vector<std::uint32_t> row_words;
  for (std::size_t w = 0; w < nw; ++w)
    if (sc.word_counts[w] >= std::max<std::uint64_t>(1, opts.min_count))
      row_words.push_back(static_cast<std::uint32_t>(w));
  if (row_words.empty()) throw DataError("scope " + scope.label() + " has no words");
  if (sc.total_tokens == 0) throw DataError("scope " + scope.label() + " is empty");

  BigramIndex ix = build_bigrams(store, sc.comms);
  std::vector<double> spe_raw(nw, 0.0);
  for (const auto& [key, count] : ix.pair_counts) {
    auto u = static_cast<std::uint32_t>(key >> 32);
    auto v = static_cast<std::uint32_t>(key & 0xffffffffu);
    BigramContingency ct{count, ix.left[u], ix.right[v], ix.total};
    double llr = llr_bigram(ct);
    spe_raw[u] = std::max(spe_raw[u], llr);
    spe_raw[v] = std::max(spe_raw[v], llr);
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::uint32_t w : row_words) {
    lo = std::min(lo, spe_raw[w]);
    hi = std::max(hi, spe_raw[w]);
  }
  double span = hi - lo;

  std::vector<FeatureRow> rows;
  rows.reserve(row_words.size());
  for (std::uint32_t w : row_words) {
    FeatureRow r;
    r.word = store.word(w);
    std::uint64_t n = sc.word_counts[w];
    r.freq = std::log10(static_cast<double>(n) / static_cast<double>(sc.total_tokens));
    std::uint64_t out = sc.outside[w];
    r.pro = static_cast<double>(n) / static_cast<double>(n + out);
    r.spe_raw = spe_raw[w];
    r.spe = span > 0.0 ? (spe_raw[w] - lo) / span : 0.0;
    r.dis = dis_value(sc.author_users[w], sc.author_count, n, sc.total_tokens, r.freq,
                      opts.variant);
    rows.push_back(std::move(r));
  }
  return FeatureTable(scope, std::move(rows));
}

namespace {
const FeatureRow& need_row(const FeatureTable& t, std::string_view w, const Scope& scope) {
  const FeatureRow* r = t.find(w);
  if (!r)
    throw DataError("word " + std::string(w) + " not present in scope " + scope.label());
  return *r;
}
}  // namespace

double frequency(const corpus::CorpusStore& store, std::string_view w, const Scope& scope) {
  return need_row(feature_table(store, scope), w, scope).freq;
}

double prominence(const corpus::CorpusStore& store, std::string_view w, const Scope& scope) {
  return need_row(feature_table(store, scope), w, scope).pro;
}

double dissemination(const corpus::CorpusStore& store, std::string_view w, const Scope& scope,
                     DisseminationVariant variant) {
  FeatureOptions opts;
  opts.variant = variant;
  return need_row(feature_table(store, scope, opts), w, scope).dis;
}

std::pair<double, double> specificity(const corpus::CorpusStore& store, std::string_view w,
                                      const Scope& scope) {
  const FeatureRow& r = need_row(feature_table(store, scope), w, scope);
  return {r.spe_raw, r.spe};
}

void FeatureTable::write_tsv(const std::string& path) const {
  io::TsvWriter w(path);
  w.cell("word");
  w.cell("freq");
  w.cell("pro");
  w.cell("spe_raw");
  w.cell("spe");
  w.cell("dis");
  w.endrow();
  for (const auto& r : rows_) {
    w.cell(r.word);
    w.cell(r.freq);
    w.cell(r.pro);
    w.cell(r.spe_raw);
    w.cell(r.spe);
    w.cell(r.dis);
    w.endrow();
  }
  w.finish();
}

FeatureTable FeatureTable::read_tsv(const std::string& path) {
  auto rows = io::read_tsv(path);
  std::vector<std::string> expect{"word", "freq", "pro", "spe_raw", "spe", "dis"};
  if (rows.empty() || rows[0] != expect) throw DataError(path + ": not a feature table");
  std::vector<FeatureRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != 6) throw DataError(path + ": ragged row " + std::to_string(i));
    FeatureRow r;
    r.word = row[0];
    r.freq = std::stod(row[1]);
    r.pro = std::stod(row[2]);
    r.spe_raw = std::stod(row[3]);
    r.spe = std::stod(row[4]);
    r.dis = std::stod(row[5]);
    out.push_back(std::move(r));
  }
  Scope s;
  s.name = "(from " + path + ")";
  return FeatureTable(std::move(s), std::move(out));
}

}  // namespace commshift::lexfeatures
