#include "commshift/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>

#include <json.hpp>

#include "commshift/error.hpp"
#include "commshift/io.hpp"
#include "commshift/rng.hpp"

namespace commshift::corpus {

namespace {
constexpr std::string_view kStoreMagic = "cshstore";
constexpr std::uint32_t kStoreVersion = 1;

bool is_punct(unsigned char c) { return std::ispunct(c) != 0; }
bool is_space(unsigned char c) { return std::isspace(c) != 0; }
}  // namespace

std::vector<std::string> tokenize(std::string_view text, const TokenizerOptions& opts) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char c : text) {
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      cur.push_back(opts.lowercase ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    }
  }
  flush();
  return out;
}

CorpusStore::CorpusStore(std::vector<Community> communities)
    : communities_(std::move(communities)), docs_(communities_.size()) {
  if (communities_.empty()) throw DataError("a corpus needs at least one community");
  for (std::size_t i = 0; i < communities_.size(); ++i)
    for (std::size_t j = i + 1; j < communities_.size(); ++j)
      if (communities_[i].name == communities_[j].name)
        throw DataError("duplicate community name: " + communities_[i].name);
}

std::optional<std::size_t> CorpusStore::find_community(std::string_view name) const {
  for (std::size_t i = 0; i < communities_.size(); ++i)
    if (communities_[i].name == name) return i;
  return std::nullopt;
}

std::size_t CorpusStore::global_index() const {
  std::optional<std::size_t> found;
  for (std::size_t i = 0; i < communities_.size(); ++i) {
    if (communities_[i].kind == CommunityKind::global) {
      if (found) throw DataError("more than one global community configured");
      found = i;
    }
  }
  if (!found) throw DataError("no global community configured");
  return *found;
}

std::vector<std::size_t> CorpusStore::member_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < communities_.size(); ++i)
    if (communities_[i].kind == CommunityKind::member) out.push_back(i);
  return out;
}

WordId CorpusStore::intern_word(std::string_view w) {
  auto it = word_ids_.find(std::string(w));
  if (it != word_ids_.end()) return it->second;
  WordId id = static_cast<WordId>(words_.size());
  words_.emplace_back(w);
  word_ids_.emplace(words_.back(), id);
  return id;
}

std::optional<WordId> CorpusStore::find_word(std::string_view w) const {
  auto it = word_ids_.find(std::string(w));
  if (it == word_ids_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t CorpusStore::intern_author(std::string_view name) {
  if (name.empty()) return kNoAuthor;
  auto it = author_ids_.find(std::string(name));
  if (it != author_ids_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(authors_.size());
  authors_.emplace_back(name);
  author_ids_.emplace(authors_.back(), id);
  return id;
}

void CorpusStore::add_document(std::size_t community, std::string_view author,
                               const std::vector<std::string>& tokens) {
  std::vector<WordId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(intern_word(t));
  add_document(community, intern_author(author), std::move(ids));
}

void CorpusStore::add_document(std::size_t community, std::uint32_t author_idx,
                               std::vector<WordId> tokens) {
  if (community >= communities_.size()) throw InternalError("community index out of range");
  if (tokens.empty()) return;
  docs_[community].push_back(Document{author_idx, std::move(tokens)});
}

void CorpusStore::rebuild_counts() {
  std::size_t nc = communities_.size();
  std::size_t nw = words_.size();
  total_tokens_.assign(nc, 0);
  word_counts_.assign(nc, std::vector<std::uint64_t>(nw, 0));
  author_users_.assign(nc, std::vector<std::uint32_t>(nw, 0));
  author_counts_.assign(nc, 0);

  // last author seen per word, reused across communities to dodge per-word sets
  std::vector<std::uint64_t> seen_stamp(nw, ~std::uint64_t{0});
  std::uint64_t stamp = 0;

  for (std::size_t c = 0; c < nc; ++c) {
    std::vector<char> author_seen(authors_.size(), 0);
    // docs grouped by author so the stamp trick works per (author, word)
    std::vector<const Document*> order;
    order.reserve(docs_[c].size());
    for (const auto& d : docs_[c]) order.push_back(&d);
    std::stable_sort(order.begin(), order.end(),
                     [](const Document* a, const Document* b) { return a->author < b->author; });

    std::uint32_t cur_author = kNoAuthor;
    bool author_open = false;
    for (const Document* d : order) {
      if (!author_open || d->author != cur_author) {
        cur_author = d->author;
        author_open = true;
        ++stamp;
      }
      for (WordId w : d->tokens) {
        total_tokens_[c] += 1;
        word_counts_[c][w] += 1;
        if (d->author != kNoAuthor && seen_stamp[w] != stamp) {
          seen_stamp[w] = stamp;
          author_users_[c][w] += 1;
        }
      }
      if (d->author != kNoAuthor && !author_seen[d->author]) {
        author_seen[d->author] = 1;
        author_counts_[c] += 1;
      }
    }
  }
}

std::uint64_t CorpusStore::occurrences(WordId w, std::size_t community) const {
  if (word_counts_.empty()) throw InternalError("counts not built; call rebuild_counts");
  return word_counts_[community][w];
}

std::uint64_t CorpusStore::occurrences(std::string_view w, std::string_view community) const {
  auto c = find_community(community);
  if (!c) throw DataError("unknown community: " + std::string(community));
  auto id = find_word(w);
  if (!id) return 0;
  return occurrences(*id, *c);
}

std::uint64_t CorpusStore::author_users(WordId w, std::size_t community) const {
  if (author_users_.empty()) throw InternalError("counts not built; call rebuild_counts");
  return author_users_[community][w];
}

CorpusStore CorpusStore::restricted(const std::vector<std::string>& names) const {
  std::vector<Community> comms;
  std::vector<std::size_t> src;
  for (const auto& n : names) {
    auto i = find_community(n);
    if (!i) throw DataError("unknown community: " + n);
    comms.push_back(communities_[*i]);
    src.push_back(*i);
  }
  CorpusStore out(std::move(comms));
  for (std::size_t c = 0; c < src.size(); ++c) {
    for (const auto& d : docs_[src[c]]) {
      std::vector<WordId> ids;
      ids.reserve(d.tokens.size());
      for (WordId w : d.tokens) ids.push_back(out.intern_word(words_[w]));
      std::uint32_t author = d.author == kNoAuthor ? kNoAuthor : out.intern_author(authors_[d.author]);
      out.add_document(c, author, std::move(ids));
    }
  }
  out.rebuild_counts();
  return out;
}

void CorpusStore::save(const std::string& path) const {
  io::BinaryWriter w(kStoreMagic, kStoreVersion);
  w.u32(static_cast<std::uint32_t>(communities_.size()));
  for (const auto& c : communities_) {
    w.str(c.name);
    w.u8(static_cast<std::uint8_t>(c.kind));
  }
  w.u32(static_cast<std::uint32_t>(words_.size()));
  for (const auto& s : words_) w.str(s);
  w.u32(static_cast<std::uint32_t>(authors_.size()));
  for (const auto& s : authors_) w.str(s);
  for (const auto& docs : docs_) {
    w.u64(docs.size());
    for (const auto& d : docs) {
      w.u32(d.author);
      w.u32_array(d.tokens);
    }
  }
  w.finish(path);
}

CorpusStore CorpusStore::load(const std::string& path) {
  io::BinaryReader r(path, kStoreMagic, kStoreVersion);
  std::uint32_t nc = r.u32();
  std::vector<Community> comms(nc);
  for (auto& c : comms) {
    c.name = r.str();
    c.kind = static_cast<CommunityKind>(r.u8());
  }
  CorpusStore store(std::move(comms));
  std::uint32_t nw = r.u32();
  for (std::uint32_t i = 0; i < nw; ++i) store.intern_word(r.str());
  std::uint32_t na = r.u32();
  for (std::uint32_t i = 0; i < na; ++i) store.intern_author(r.str());
  for (std::uint32_t c = 0; c < nc; ++c) {
    std::uint64_t nd = r.u64();
    for (std::uint64_t i = 0; i < nd; ++i) {
      std::uint32_t author = r.u32();
      std::vector<WordId> tokens = r.u32_array();
      for (WordId t : tokens)
        if (t >= nw) throw DataError(path + ": token id out of range");
      if (author != kNoAuthor && author >= na)
        throw DataError(path + ": author id out of range");
      store.add_document(c, author, std::move(tokens));
    }
  }
  r.expect_end();
  store.rebuild_counts();
  return store;
}

IngestStats ingest_jsonl(CorpusStore& store, std::istream& in, const TokenizerOptions& opts) {
  IngestStats stats;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++stats.records;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("community") ||
        !j.contains("body") || !j["community"].is_string() || !j["body"].is_string()) {
      ++stats.malformed;
      continue;
    }
    auto community = store.find_community(j["community"].get<std::string>());
    if (!community) {
      ++stats.skipped_unknown_community;
      continue;
    }
    std::string author;
    if (j.contains("author") && j["author"].is_string()) author = j["author"].get<std::string>();
    store.add_document(*community, author, tokenize(j["body"].get<std::string>(), opts));
    ++stats.kept;
  }
  return stats;
}

CorpusStore ingest(const IngestConfig& config, const std::vector<std::string>& jsonl_paths,
                   IngestStats* stats) {
  CorpusStore store(config.communities);
  IngestStats total;
  for (const auto& path : jsonl_paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open input " + path);
    IngestStats s = ingest_jsonl(store, in, config.tokenizer);
    total.records += s.records;
    total.kept += s.kept;
    total.skipped_unknown_community += s.skipped_unknown_community;
    total.malformed += s.malformed;
  }
  store.rebuild_counts();
  if (stats) *stats = total;
  return store;
}

CorpusStore subsample(const CorpusStore& store, std::size_t community,
                      std::uint64_t target_tokens, std::uint64_t seed) {
  if (community >= store.community_count()) throw DataError("community index out of range");
  CorpusStore out(store.communities());
  // word/author tables copied wholesale so ids stay comparable across stores
  for (std::size_t i = 0; i < store.distinct_words(); ++i)
    out.intern_word(store.word(static_cast<WordId>(i)));
  for (const auto& a : store.authors()) out.intern_author(a);

  for (std::size_t c = 0; c < store.community_count(); ++c) {
    if (c != community) {
      for (const auto& d : store.documents(c)) out.add_document(c, d.author, d.tokens);
      continue;
    }
    const auto& docs = store.documents(c);
    std::vector<std::uint32_t> order(docs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
    Rng rng(derive_seed(seed, "subsample", community));
    rng.shuffle(order);
    std::uint64_t kept = 0;
    for (std::uint32_t i : order) {
      if (kept >= target_tokens) break;
      out.add_document(c, docs[i].author, docs[i].tokens);
      kept += docs[i].tokens.size();
    }
  }
  out.rebuild_counts();
  return out;
}

Vocabulary Vocabulary::build(const CorpusStore& store, std::uint64_t min_count) {
  std::size_t nw = store.distinct_words();
  std::vector<std::uint64_t> totals(nw, 0);
  std::vector<char> everywhere(nw, 1);
  for (std::size_t c = 0; c < store.community_count(); ++c) {
    for (std::size_t w = 0; w < nw; ++w) {
      std::uint64_t n = store.occurrences(static_cast<WordId>(w), c);
      totals[w] += n;
      if (n < min_count) everywhere[w] = 0;
    }
  }
  std::vector<std::uint32_t> ids;
  for (std::size_t w = 0; w < nw; ++w)
    if (everywhere[w]) ids.push_back(static_cast<std::uint32_t>(w));
  if (ids.empty())
    throw DataError("vocabulary is empty: no word reaches min_count=" +
                    std::to_string(min_count) + " in every community");
  std::sort(ids.begin(), ids.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (totals[a] != totals[b]) return totals[a] > totals[b];
    return store.word(a) < store.word(b);
  });
  Vocabulary v;
  v.min_count_ = min_count;
  v.words_.reserve(ids.size());
  v.totals_.reserve(ids.size());
  for (std::uint32_t id : ids) {
    v.ids_.emplace(store.word(id), static_cast<std::uint32_t>(v.words_.size()));
    v.words_.push_back(store.word(id));
    v.totals_.push_back(totals[id]);
  }
  return v;
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words,
                                  std::vector<std::uint64_t> totals,
                                  std::uint64_t min_count) {
  if (words.size() != totals.size()) throw InternalError("vocabulary arrays disagree");
  Vocabulary v;
  v.min_count_ = min_count;
  v.words_ = std::move(words);
  v.totals_ = std::move(totals);
  for (std::size_t i = 0; i < v.words_.size(); ++i)
    if (!v.ids_.emplace(v.words_[i], static_cast<std::uint32_t>(i)).second)
      throw DataError("duplicate word in vocabulary: " + v.words_[i]);
  return v;
}

std::optional<std::uint32_t> Vocabulary::id(std::string_view w) const {
  auto it = ids_.find(std::string(w));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

}  // namespace commshift::corpus
