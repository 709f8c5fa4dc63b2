#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace commshift::corpus {

using WordId = std::uint32_t;
inline constexpr std::uint32_t kNoAuthor = 0xffffffffu;

enum class CommunityKind : std::uint8_t { member = 0, global = 1 };

struct Community {
  std::string name;
  CommunityKind kind = CommunityKind::member;
};

struct TokenizerOptions {
  bool lowercase = true;
};

// whitespace split; punctuation bytes become standalone tokens
std::vector<std::string> tokenize(std::string_view text, const TokenizerOptions& opts = {});

struct Document {
  std::uint32_t author = kNoAuthor;  // index into CorpusStore::authors()
  std::vector<WordId> tokens;
};

// Tokenized documents grouped by community, with interned word and author tables
// and the per-community counts everything downstream reads:
//   total_tokens(c)      N_c
//   occurrences(w, c)    N^w_c
//   author_users(w, c)   U^w_c   distinct named authors of documents containing w
//   author_count(c)      U_c     distinct named authors posting in c
// Anonymous documents (empty author string) count toward token totals but never
// toward author statistics. Built stores are treated as immutable.
class CorpusStore {
 public:
  explicit CorpusStore(std::vector<Community> communities);

  std::size_t community_count() const { return communities_.size(); }
  const Community& community(std::size_t i) const { return communities_[i]; }
  const std::vector<Community>& communities() const { return communities_; }
  std::optional<std::size_t> find_community(std::string_view name) const;
  // index of the unique global community; throws DataError if absent
  std::size_t global_index() const;
  std::vector<std::size_t> member_indices() const;

  WordId intern_word(std::string_view w);
  std::optional<WordId> find_word(std::string_view w) const;
  const std::string& word(WordId id) const { return words_[id]; }
  std::size_t distinct_words() const { return words_.size(); }

  std::uint32_t intern_author(std::string_view name);  // "" -> kNoAuthor
  const std::vector<std::string>& authors() const { return authors_; }

  void add_document(std::size_t community, std::string_view author,
                    const std::vector<std::string>& tokens);
  void add_document(std::size_t community, std::uint32_t author_idx,
                    std::vector<WordId> tokens);
  // recomputes all count tables; call once after the last add_document
  void rebuild_counts();

  const std::vector<Document>& documents(std::size_t community) const {
    return docs_[community];
  }
  std::uint64_t total_tokens(std::size_t community) const { return total_tokens_[community]; }
  std::uint64_t occurrences(WordId w, std::size_t community) const;
  std::uint64_t occurrences(std::string_view w, std::string_view community) const;
  std::uint64_t author_users(WordId w, std::size_t community) const;
  std::uint64_t author_count(std::size_t community) const { return author_counts_[community]; }

  // new store containing only the named communities (order preserved as given)
  CorpusStore restricted(const std::vector<std::string>& names) const;

  void save(const std::string& path) const;
  static CorpusStore load(const std::string& path);

 private:
  std::vector<Community> communities_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> word_ids_;
  std::vector<std::string> authors_;
  std::unordered_map<std::string, std::uint32_t> author_ids_;
  std::vector<std::vector<Document>> docs_;

  std::vector<std::uint64_t> total_tokens_;
  std::vector<std::vector<std::uint64_t>> word_counts_;    // [community][word]
  std::vector<std::vector<std::uint32_t>> author_users_;   // [community][word]
  std::vector<std::uint64_t> author_counts_;
};

struct IngestRecord {
  std::string community;
  std::string author;
  std::string body;
};

struct IngestConfig {
  std::vector<Community> communities;
  TokenizerOptions tokenizer;
};

struct IngestStats {
  std::uint64_t records = 0;
  std::uint64_t kept = 0;
  std::uint64_t skipped_unknown_community = 0;
  std::uint64_t malformed = 0;
};

// one JSON object per line: {"community": ..., "author": ..., "body": ...}
IngestStats ingest_jsonl(CorpusStore& store, std::istream& in,
                         const TokenizerOptions& opts = {});
CorpusStore ingest(const IngestConfig& config, const std::vector<std::string>& jsonl_paths,
                   IngestStats* stats = nullptr);

// Document-level subsampling of one community down to ~target_tokens: keeps a
// seeded random subset of documents, overshooting by at most one document.
// Other communities are copied unchanged.
CorpusStore subsample(const CorpusStore& store, std::size_t community,
                      std::uint64_t target_tokens, std::uint64_t seed);

// Words occurring at least min_count times in every community of the store,
// ordered by (total count desc, word asc); ids are dense.
class Vocabulary {
 public:
  static Vocabulary build(const CorpusStore& store, std::uint64_t min_count);
  // reconstruction from persisted containers; words must already be in rank order
  static Vocabulary from_words(std::vector<std::string> words,
                               std::vector<std::uint64_t> totals, std::uint64_t min_count);

  std::size_t size() const { return words_.size(); }
  const std::string& word(std::uint32_t id) const { return words_[id]; }
  const std::vector<std::string>& words() const { return words_; }
  std::optional<std::uint32_t> id(std::string_view w) const;
  std::uint64_t min_count() const { return min_count_; }
  std::uint64_t total_count(std::uint32_t id) const { return totals_[id]; }

  Vocabulary() = default;

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> totals_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::uint64_t min_count_ = 0;
};

}  // namespace commshift::corpus
