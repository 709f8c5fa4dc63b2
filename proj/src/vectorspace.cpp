#include "commshift/vectorspace.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <thread>

#include "commshift/error.hpp"
#include "commshift/io.hpp"
#include "commshift/rng.hpp"
#include "commshift/sgns.hpp"

namespace commshift::vectorspace {

namespace {
constexpr std::string_view kSpaceMagic = "cshspace";
constexpr std::uint32_t kSpaceVersion = 1;
constexpr std::size_t kUnigramTableSize = std::size_t{1} << 20;
}  // namespace

EmbeddingSpace::EmbeddingSpace(corpus::Vocabulary vocab,
                               std::vector<corpus::Community> communities,
                               const TrainingConfig& config)
    : vocab_(std::move(vocab)), communities_(std::move(communities)), config_(config) {
  if (communities_.empty()) throw DataError("a space needs at least one community");
  if (config_.dim == 0) throw UsageError("embedding dim must be positive");
  std::size_t v = vocab_.size();
  std::size_t d = config_.dim;
  main_.assign(v * d, 0.0f);
  ctx_.assign(v * d, 0.0f);
  dev_.assign(communities_.size(), std::vector<float>(v * d, 0.0f));

  Rng rng(derive_seed(config_.seed, "init"));
  float half = 0.5f / static_cast<float>(d);
  for (auto& x : main_) x = static_cast<float>(rng.uniform(-half, half));
}

std::optional<std::size_t> EmbeddingSpace::find_community(std::string_view name) const {
  for (std::size_t i = 0; i < communities_.size(); ++i)
    if (communities_[i].name == name) return i;
  return std::nullopt;
}

std::size_t EmbeddingSpace::global_index() const {
  std::optional<std::size_t> found;
  for (std::size_t i = 0; i < communities_.size(); ++i) {
    if (communities_[i].kind == corpus::CommunityKind::global) {
      if (found) throw DataError("more than one global community in space");
      found = i;
    }
  }
  if (!found) throw DataError("space has no global community");
  return *found;
}

std::vector<std::size_t> EmbeddingSpace::member_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < communities_.size(); ++i)
    if (communities_[i].kind == corpus::CommunityKind::member) out.push_back(i);
  return out;
}

std::span<const float> EmbeddingSpace::main_row(std::uint32_t word) const {
  return {main_.data() + std::size_t{word} * config_.dim, config_.dim};
}
std::span<const float> EmbeddingSpace::deviation_row(std::size_t community,
                                                     std::uint32_t word) const {
  return {dev_[community].data() + std::size_t{word} * config_.dim, config_.dim};
}
std::span<const float> EmbeddingSpace::context_row(std::uint32_t word) const {
  return {ctx_.data() + std::size_t{word} * config_.dim, config_.dim};
}
std::span<float> EmbeddingSpace::main_row(std::uint32_t word) {
  return {main_.data() + std::size_t{word} * config_.dim, config_.dim};
}
std::span<float> EmbeddingSpace::deviation_row(std::size_t community, std::uint32_t word) {
  return {dev_[community].data() + std::size_t{word} * config_.dim, config_.dim};
}
std::span<float> EmbeddingSpace::context_row(std::uint32_t word) {
  return {ctx_.data() + std::size_t{word} * config_.dim, config_.dim};
}

std::vector<float> EmbeddingSpace::vector(std::uint32_t word, std::size_t community) const {
  auto m = main_row(word);
  auto d = deviation_row(community, word);
  std::vector<float> out(config_.dim);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = m[i] + d[i];
  return out;
}

std::vector<float> EmbeddingSpace::vector(std::string_view word,
                                          std::string_view community) const {
  auto id = vocab_.id(word);
  if (!id) throw DataError("word not in vocabulary: " + std::string(word));
  auto c = find_community(community);
  if (!c) throw DataError("unknown community: " + std::string(community));
  return vector(*id, *c);
}

void EmbeddingSpace::save(const std::string& path) const {
  io::BinaryWriter w(kSpaceMagic, kSpaceVersion);
  w.u32(config_.dim);
  w.u32(static_cast<std::uint32_t>(communities_.size()));
  for (const auto& c : communities_) {
    w.str(c.name);
    w.u8(static_cast<std::uint8_t>(c.kind));
  }
  w.u32(static_cast<std::uint32_t>(vocab_.size()));
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    w.str(vocab_.word(static_cast<std::uint32_t>(i)));
    w.u64(vocab_.total_count(static_cast<std::uint32_t>(i)));
  }
  w.u64(vocab_.min_count());
  w.u32(config_.window);
  w.u32(config_.negatives);
  w.u32(config_.epochs);
  w.f32(config_.learning_rate);
  w.f32(config_.min_lr);
  w.f32(config_.l2_lambda);
  w.f32(config_.unigram_power);
  w.u8(config_.subsample_frequent ? 1 : 0);
  w.f32(config_.subsample_threshold);
  w.u32(config_.threads);
  w.u64(config_.seed);
  w.f32_array(main_);
  w.f32_array(ctx_);
  for (const auto& d : dev_) w.f32_array(d);
  w.finish(path);
}

EmbeddingSpace EmbeddingSpace::load(const std::string& path) {
  io::BinaryReader r(path, kSpaceMagic, kSpaceVersion);
  TrainingConfig cfg;
  cfg.dim = r.u32();
  std::uint32_t nc = r.u32();
  std::vector<corpus::Community> comms(nc);
  for (auto& c : comms) {
    c.name = r.str();
    c.kind = static_cast<corpus::CommunityKind>(r.u8());
  }
  std::uint32_t nv = r.u32();
  std::vector<std::string> words(nv);
  std::vector<std::uint64_t> totals(nv);
  for (std::uint32_t i = 0; i < nv; ++i) {
    words[i] = r.str();
    totals[i] = r.u64();
  }
  std::uint64_t min_count = r.u64();
  cfg.window = r.u32();
  cfg.negatives = r.u32();
  cfg.epochs = r.u32();
  cfg.learning_rate = r.f32();
  cfg.min_lr = r.f32();
  cfg.l2_lambda = r.f32();
  cfg.unigram_power = r.f32();
  cfg.subsample_frequent = r.u8() != 0;
  cfg.subsample_threshold = r.f32();
  cfg.threads = r.u32();
  cfg.seed = r.u64();

  EmbeddingSpace space(corpus::Vocabulary::from_words(std::move(words), std::move(totals),
                                                      min_count),
                       std::move(comms), cfg);
  std::size_t expect = std::size_t{nv} * cfg.dim;
  auto check = [&](const std::vector<float>& a) {
    if (a.size() != expect) throw DataError(path + ": table size mismatch");
  };
  space.main_ = r.f32_array();
  check(space.main_);
  space.ctx_ = r.f32_array();
  check(space.ctx_);
  for (auto& d : space.dev_) {
    d = r.f32_array();
    check(d);
  }
  r.expect_end();
  return space;
}

void EmbeddingSpace::export_text(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  auto write_table = [&](const std::string& name, auto row_of) {
    std::string buf;
    char num[32];
    buf += std::to_string(vocab_.size()) + " " + std::to_string(config_.dim) + "\n";
    for (std::uint32_t w = 0; w < vocab_.size(); ++w) {
      buf += vocab_.word(w);
      auto row = row_of(w);
      for (std::size_t i = 0; i < row.size(); ++i) {
        std::snprintf(num, sizeof(num), " %.6f", static_cast<double>(row[i]));
        buf += num;
      }
      buf += '\n';
    }
    io::atomic_write_text(dir + "/" + name, buf);
  };
  write_table("main.txt", [&](std::uint32_t w) { return main_row(w); });
  for (std::size_t c = 0; c < communities_.size(); ++c) {
    write_table("dev_" + communities_[c].name + ".txt",
                [&](std::uint32_t w) { return deviation_row(c, w); });
    write_table("composed_" + communities_[c].name + ".txt", [&](std::uint32_t w) {
      auto v = vector(w, c);
      return std::vector<float>(v.begin(), v.end());
    });
  }
}

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw InternalError("cosine of vectors with different sizes");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DataError("cosine undefined for a zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingSpace& space, std::string_view word,
                                        std::string_view community, std::size_t k,
                                        const std::vector<std::string>& scope) {
  auto qw = space.vocab().id(word);
  if (!qw) throw DataError("word not in vocabulary: " + std::string(word));
  auto qc = space.find_community(community);
  if (!qc) throw DataError("unknown community: " + std::string(community));

  std::vector<std::size_t> comms;
  if (scope.empty()) {
    comms.resize(space.communities().size());
    for (std::size_t i = 0; i < comms.size(); ++i) comms[i] = i;
  } else {
    for (const auto& name : scope) {
      auto c = space.find_community(name);
      if (!c) throw DataError("unknown community: " + name);
      comms.push_back(*c);
    }
    std::sort(comms.begin(), comms.end());
    comms.erase(std::unique(comms.begin(), comms.end()), comms.end());
  }

  std::vector<float> q = space.vector(*qw, *qc);
  double qn = 0;
  for (float x : q) qn += double(x) * x;
  if (qn == 0.0) throw DataError("cosine undefined for a zero vector");
  qn = std::sqrt(qn);

  struct Cand {
    double cos;
    std::uint32_t word;
    std::size_t comm;
  };
  std::vector<Cand> cands;
  cands.reserve(comms.size() * space.vocab().size());
  for (std::size_t c : comms) {
    for (std::uint32_t w = 0; w < space.vocab().size(); ++w) {
      if (w == *qw && c == *qc) continue;
      auto m = space.main_row(w);
      auto d = space.deviation_row(c, w);
      double dot = 0, nn = 0;
      for (std::size_t i = 0; i < m.size(); ++i) {
        double x = double(m[i]) + d[i];
        dot += x * q[i];
        nn += x * x;
      }
      if (nn == 0.0) continue;  // unrankable
      cands.push_back({dot / (qn * std::sqrt(nn)), w, c});
    }
  }
  auto better = [](const Cand& a, const Cand& b) {
    if (a.cos != b.cos) return a.cos > b.cos;
    if (a.word != b.word) return a.word < b.word;
    return a.comm < b.comm;
  };
  std::size_t take = std::min(k, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + take, cands.end(), better);
  std::vector<Neighbor> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    out.push_back({space.vocab().word(cands[i].word),
                   space.communities()[cands[i].comm].name, cands[i].cos});
  return out;
}

namespace {

struct PreparedDoc {
  std::uint32_t community;
  std::vector<std::uint32_t> ids;  // vocabulary ids, OOV removed
};

// word2vec-style cumulative table for drawing negatives by unigram^power
std::vector<std::uint32_t> build_unigram_table(const corpus::Vocabulary& vocab, float power) {
  std::vector<std::uint32_t> table(kUnigramTableSize);
  double total = 0;
  for (std::uint32_t w = 0; w < vocab.size(); ++w)
    total += std::pow(static_cast<double>(vocab.total_count(w)), power);
  std::uint32_t i = 0;
  double cum = std::pow(static_cast<double>(vocab.total_count(0)), power) / total;
  for (std::size_t a = 0; a < table.size(); ++a) {
    table[a] = i;
    if (static_cast<double>(a + 1) / static_cast<double>(table.size()) > cum &&
        i + 1 < vocab.size()) {
      ++i;
      cum += std::pow(static_cast<double>(vocab.total_count(i)), power) / total;
    }
  }
  return table;
}

std::uint64_t pair_count(std::size_t len, std::uint32_t window) {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < len; ++i) {
    std::size_t lo = i > window ? i - window : 0;
    std::size_t hi = std::min(len - 1, i + window);
    n += hi - lo;
  }
  return n;
}

}  // namespace

EmbeddingSpace train(const corpus::CorpusStore& store, const corpus::Vocabulary& vocab,
                     const TrainingConfig& config) {
  EmbeddingSpace space(vocab, store.communities(), config);
  const std::uint32_t dim = config.dim;
  const std::uint32_t window = config.window;
  if (window == 0) throw UsageError("window must be positive");

  // store word id -> vocabulary id, -1 for out-of-vocabulary
  std::vector<std::int32_t> to_vocab(store.distinct_words(), -1);
  for (std::size_t w = 0; w < store.distinct_words(); ++w) {
    if (auto id = vocab.id(store.word(static_cast<corpus::WordId>(w)))) {
      to_vocab[w] = static_cast<std::int32_t>(*id);
    }
  }

  std::vector<PreparedDoc> docs;
  std::uint64_t pairs_per_epoch = 0;
  for (std::size_t c = 0; c < store.community_count(); ++c) {
    for (const auto& d : store.documents(c)) {
      PreparedDoc pd;
      pd.community = static_cast<std::uint32_t>(c);
      pd.ids.reserve(d.tokens.size());
      for (corpus::WordId t : d.tokens) {
        std::int32_t id = to_vocab[t];
        if (id >= 0) pd.ids.push_back(static_cast<std::uint32_t>(id));
      }
      if (pd.ids.size() < 2) continue;
      pairs_per_epoch += pair_count(pd.ids.size(), window);
      docs.push_back(std::move(pd));
    }
  }
  if (docs.empty()) return space;
  const std::uint64_t total_pairs =
      std::max<std::uint64_t>(1, pairs_per_epoch * config.epochs);

  std::vector<std::uint32_t> table = build_unigram_table(vocab, config.unigram_power);

  std::vector<double> keep_prob;
  if (config.subsample_frequent) {
    double total_tokens = 0;
    for (std::uint32_t w = 0; w < vocab.size(); ++w) total_tokens += vocab.total_count(w);
    keep_prob.resize(vocab.size());
    for (std::uint32_t w = 0; w < vocab.size(); ++w) {
      double f = vocab.total_count(w) / total_tokens;
      keep_prob[w] = std::min(1.0, std::sqrt(config.subsample_threshold / f));
    }
  }

  const float lr0 = config.learning_rate;
  const float lr_min = std::min(config.min_lr, config.learning_rate);
  const float lambda = config.l2_lambda;
  const std::uint32_t negatives = config.negatives;
  std::atomic<std::uint64_t> processed{0};

  auto run_shard = [&](const std::vector<std::uint32_t>& order, std::size_t begin,
                       std::size_t end, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    std::vector<float> h(dim), grad_h(dim);
    std::vector<float*> rows(negatives + 1);
    std::vector<int> labels(negatives + 1);
    std::vector<std::uint32_t> kept;
    std::uint64_t local = 0;
    std::uint64_t base = processed.load(std::memory_order_relaxed);

    for (std::size_t di = begin; di < end; ++di) {
      const PreparedDoc& doc = docs[order[di]];
      const std::vector<std::uint32_t>* seq = &doc.ids;
      if (!keep_prob.empty()) {
        kept.clear();
        for (std::uint32_t id : doc.ids)
          if (rng.uniform() < keep_prob[id]) kept.push_back(id);
        if (kept.size() < 2) continue;
        seq = &kept;
      }
      const auto& ids = *seq;
      float* devs = space.deviation_row(doc.community, 0).data();
      for (std::size_t pos = 0; pos < ids.size(); ++pos) {
        std::uint32_t center = ids[pos];
        std::size_t lo = pos > window ? pos - window : 0;
        std::size_t hi = std::min(ids.size() - 1, pos + window);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == pos) continue;
          std::uint32_t target = ids[j];
          std::size_t k = 0;
          rows[k] = space.context_row(target).data();
          labels[k++] = 1;
          for (std::uint32_t n = 0; n < negatives; ++n) {
            std::uint32_t neg = table[rng.next() & (kUnigramTableSize - 1)];
            if (neg == target) continue;
            rows[k] = space.context_row(neg).data();
            labels[k++] = 0;
          }
          double t = static_cast<double>(base + local) / static_cast<double>(total_pairs);
          float lr = lr0 + (lr_min - lr0) * static_cast<float>(t);
          sgns_step(space.main_row(center).data(), devs + std::size_t{center} * dim,
                    rows.data(), labels.data(), k, dim, lr, lambda, h.data(),
                    grad_h.data());
          ++local;
          if ((local & 0xfff) == 0) {
            base = processed.fetch_add(local, std::memory_order_relaxed) + local;
            local = 0;
          }
        }
      }
    }
    processed.fetch_add(local, std::memory_order_relaxed);
  };

  std::vector<std::uint32_t> order(docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);

  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffler(derive_seed(config.seed, "epoch", epoch));
    shuffler.shuffle(order);
    std::uint32_t nthreads = std::max<std::uint32_t>(1, config.threads);
    if (nthreads == 1) {
      run_shard(order, 0, order.size(), derive_seed(config.seed, "neg", epoch));
    } else {
      std::vector<std::thread> pool;
      std::size_t chunk = (order.size() + nthreads - 1) / nthreads;
      for (std::uint32_t t = 0; t < nthreads; ++t) {
        std::size_t b = std::min(order.size(), std::size_t{t} * chunk);
        std::size_t e = std::min(order.size(), b + chunk);
        if (b >= e) break;
        pool.emplace_back(run_shard, std::cref(order), b, e,
                          derive_seed(config.seed, "neg", std::uint64_t{epoch} * 4096 + t));
      }
      for (auto& th : pool) th.join();
    }
  }
  return space;
}

}  // namespace commshift::vectorspace
