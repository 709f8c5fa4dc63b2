#include "commshift/lmeval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <unordered_map>

#include "commshift/io.hpp"

namespace commshift::lmeval {

namespace {

constexpr std::string_view kModelMagic = "cshlmodl";

std::uint64_t community_hash(std::string_view community) {
  return fnv1a(community);
}

}  // namespace

Split split_documents(const corpus::CorpusStore& store, std::string_view community,
                      std::array<double, 3> ratios, std::uint64_t seed) {
  auto ci = store.find_community(community);
  if (!ci) throw DataError("unknown community: " + std::string(community));
  for (double r : ratios)
    if (!(r >= 0.0)) throw DataError("split ratios must be non-negative");
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(sum - 1.0) > 1e-9) throw DataError("split ratios must sum to 1");

  std::size_t n = store.documents(*ci).size();
  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
  Rng rng(derive_seed(seed, "split", community_hash(community)));
  rng.shuffle(order);

  auto n_train = static_cast<std::size_t>(ratios[0] * static_cast<double>(n));
  auto n_valid = static_cast<std::size_t>(ratios[1] * static_cast<double>(n));
  if (n_train == 0 || n_valid == 0 || n_train + n_valid >= n)
    throw DataError("split leaves an empty part for community " +
                    std::string(community));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.valid.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid),
                order.end());
  return s;
}

void LanguageModel::rebuild_index() {
  index_.clear();
  for (std::uint32_t i = 0; i < words_.size(); ++i) index_[words_[i]] = i;
}

std::uint32_t LanguageModel::token_id(std::string_view word) const {
  auto it = index_.find(word);
  return it == index_.end() ? unk_id() : it->second;
}

std::optional<std::uint32_t> LanguageModel::known_id(std::string_view word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void LanguageModel::save(const std::filesystem::path& path) const {
  io::BinaryWriter w(kModelMagic, kVersion);
  w.str(community_);
  w.u32(static_cast<std::uint32_t>(words_.size()));
  for (const auto& s : words_) w.str(s);
  w.u32(dim_);
  w.u32(config_.layers);
  w.u32(config_.hidden_size);
  w.u32(config_.epochs);
  w.f32(config_.adam_lr);
  w.f32(config_.dropout);
  w.u32(config_.batch_size);
  w.u32(config_.bptt);
  w.f32(config_.clip_norm);
  w.u32(config_.eval_batch_size);
  for (double r : config_.split_ratios) w.f64(r);
  w.u64(config_.seed);

  auto mat = [&](const Eigen::MatrixXf& m) {
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    w.f32_array(std::span<const float>(m.data(), static_cast<std::size_t>(m.size())));
  };
  mat(net_.embedding);
  w.u32(static_cast<std::uint32_t>(net_.params.layers.size()));
  for (const auto& l : net_.params.layers) {
    mat(l.wx);
    mat(l.wh);
    mat(l.b);
  }
  mat(net_.params.proj);
  mat(net_.params.proj_b);
  w.finish(path.string());
}

LanguageModel LanguageModel::load(const std::filesystem::path& path) {
  io::BinaryReader r(path.string(), kModelMagic, kVersion);
  LanguageModel lm;
  lm.community_ = r.str();
  std::uint32_t nw = r.u32();
  lm.words_.reserve(nw);
  for (std::uint32_t i = 0; i < nw; ++i) lm.words_.push_back(r.str());
  lm.dim_ = r.u32();
  lm.config_.layers = r.u32();
  lm.config_.hidden_size = r.u32();
  lm.config_.epochs = r.u32();
  lm.config_.adam_lr = r.f32();
  lm.config_.dropout = r.f32();
  lm.config_.batch_size = r.u32();
  lm.config_.bptt = r.u32();
  lm.config_.clip_norm = r.f32();
  lm.config_.eval_batch_size = r.u32();
  for (double& ratio : lm.config_.split_ratios) ratio = r.f64();
  lm.config_.seed = r.u64();

  auto mat = [&]() {
    std::uint32_t rows = r.u32();
    std::uint32_t cols = r.u32();
    auto a = r.f32_array();
    if (a.size() != static_cast<std::size_t>(rows) * cols)
      throw DataError("matrix size mismatch in model container");
    Eigen::MatrixXf m(rows, cols);
    std::copy(a.begin(), a.end(), m.data());
    return m;
  };
  Eigen::MatrixXf emb = mat();
  std::uint32_t nl = r.u32();
  if (emb.rows() == 0 || emb.cols() != nw + 2)
    throw DataError("embedding shape mismatch in model container");
  lm.net_ = LmNetwork<float>(nl, static_cast<std::size_t>(emb.rows()),
                             lm.config_.hidden_size, static_cast<std::size_t>(emb.cols()));
  lm.net_.embedding = std::move(emb);
  for (std::uint32_t l = 0; l < nl; ++l) {
    lm.net_.params.layers[l].wx = mat();
    lm.net_.params.layers[l].wh = mat();
    lm.net_.params.layers[l].b = mat();
  }
  lm.net_.params.proj = mat();
  lm.net_.params.proj_b = mat();
  r.expect_end();
  lm.rebuild_index();
  return lm;
}

namespace {

// documents of one split as model token id sequences (no EOS appended)
std::vector<std::vector<std::uint32_t>> doc_id_sequences(
    const LanguageModel& lm, const corpus::CorpusStore& store, std::size_t community,
    const std::vector<std::uint32_t>& docs) {
  const auto& all = store.documents(community);
  std::vector<std::vector<std::uint32_t>> out;
  out.reserve(docs.size());
  for (std::uint32_t di : docs) {
    const auto& d = all[di];
    std::vector<std::uint32_t> ids;
    ids.reserve(d.tokens.size());
    for (auto t : d.tokens) ids.push_back(lm.token_id(store.word(t)));
    out.push_back(std::move(ids));
  }
  return out;
}

std::vector<std::uint32_t> flatten_with_eos(
    const std::vector<std::vector<std::uint32_t>>& docs, std::uint32_t eos) {
  std::vector<std::uint32_t> stream;
  for (const auto& d : docs) {
    stream.insert(stream.end(), d.begin(), d.end());
    stream.push_back(eos);
  }
  return stream;
}

// stream cut into B contiguous segments laid out as columns
IdMatrix batchify(const std::vector<std::uint32_t>& stream, std::size_t batch) {
  std::size_t t = stream.size() / batch;
  if (t < 2) throw DataError("token stream too short to batch");
  IdMatrix m(t, batch);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < t; ++i) m.at(i, b) = stream[b * t + i];
  return m;
}

struct ProbeResult {
  double perplexity = 0;
  std::size_t occurrences = 0;
};

// perplexity over the successors of wid inside docs, optionally overriding the
// word's input embedding. Reset mode probes each occurrence with one step from
// a zero state; carry mode runs whole documents.
ProbeResult probe_word(const LmNetwork<float>& net, std::uint32_t wid,
                       const float* override_vec,
                       const std::vector<std::vector<std::uint32_t>>& docs,
                       bool carry_context) {
  Eigen::VectorXf x(net.dim());
  if (override_vec)
    x = Eigen::Map<const Eigen::VectorXf>(override_vec,
                                          static_cast<Eigen::Index>(net.dim()));
  else
    x = net.embedding.col(wid);

  double nll = 0;
  std::size_t n = 0;
  if (!carry_context) {
    auto state = net.zero_state(1);
    Eigen::VectorXf lp = net.step_logprobs(x, state);
    for (const auto& d : docs)
      for (std::size_t i = 0; i + 1 < d.size(); ++i)
        if (d[i] == wid) {
          nll -= static_cast<double>(lp[d[i + 1]]);
          ++n;
        }
  } else {
    for (const auto& d : docs) {
      bool has = false;
      for (std::size_t i = 0; i + 1 < d.size(); ++i)
        if (d[i] == wid) {
          has = true;
          break;
        }
      if (!has) continue;
      auto state = net.zero_state(1);
      for (std::size_t i = 0; i < d.size(); ++i) {
        Eigen::VectorXf xi = d[i] == wid ? x : Eigen::VectorXf(net.embedding.col(d[i]));
        if (d[i] == wid && i + 1 < d.size()) {
          Eigen::VectorXf lp = net.step_logprobs(xi, state);
          nll -= static_cast<double>(lp[d[i + 1]]);
          ++n;
        } else {
          net.step_hidden(xi, state);
        }
      }
    }
  }
  ProbeResult r;
  r.occurrences = n;
  if (n > 0) r.perplexity = std::exp(nll / static_cast<double>(n));
  return r;
}

}  // namespace

LanguageModel train_lm(const corpus::CorpusStore& store,
                       const vectorspace::EmbeddingSpace& space,
                       std::string_view community, const LMConfig& config,
                       std::vector<EpochLog>* log) {
  auto store_ci = store.find_community(community);
  if (!store_ci) throw DataError("unknown community: " + std::string(community));
  auto space_ci = space.find_community(community);
  if (!space_ci) throw DataError("community missing from embedding space: " +
                                 std::string(community));
  if (config.hidden_size != space.dim())
    throw DataError("hidden size must equal the embedding dimension");
  if (config.layers == 0) throw DataError("language model needs at least one layer");
  if (config.batch_size == 0 || config.eval_batch_size == 0 || config.bptt == 0)
    throw DataError("batch size and bptt must be positive");

  LanguageModel lm;
  lm.community_ = std::string(community);
  lm.words_ = space.vocab().words();
  lm.dim_ = space.dim();
  lm.config_ = config;
  lm.rebuild_index();

  const std::uint32_t v = lm.vocab_size();
  lm.net_ = LmNetwork<float>(config.layers, lm.dim_, config.hidden_size, v + 2u);

  for (std::uint32_t w = 0; w < v; ++w) {
    auto vec = space.vector(w, *space_ci);
    lm.net_.embedding.col(w) =
        Eigen::Map<const Eigen::VectorXf>(vec.data(), static_cast<Eigen::Index>(vec.size()));
  }
  {
    Rng rng(derive_seed(config.seed, "lmunk", community_hash(community)));
    float bound = 0.5f / static_cast<float>(lm.dim_);
    for (std::uint32_t col = v; col < v + 2u; ++col)
      for (std::uint32_t i = 0; i < lm.dim_; ++i)
        lm.net_.embedding(i, col) =
            static_cast<float>(rng.uniform(-bound, bound));
  }
  {
    Rng rng(derive_seed(config.seed, "lminit", community_hash(community)));
    float bound = 1.0f / std::sqrt(static_cast<float>(config.hidden_size));
    auto fill = [&](Eigen::MatrixXf& m) {
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
          m(i, j) = static_cast<float>(rng.uniform(-bound, bound));
    };
    for (auto& l : lm.net_.params.layers) {
      fill(l.wx);
      fill(l.wh);
      l.b.setZero();
      // small positive forget-gate bias stabilizes early epochs
      l.b.middleRows(static_cast<Eigen::Index>(config.hidden_size),
                     static_cast<Eigen::Index>(config.hidden_size))
          .setConstant(1.0f);
    }
    fill(lm.net_.params.proj);
    lm.net_.params.proj_b.setZero();
  }

  Split sp = split_documents(store, community, config.split_ratios, config.seed);
  auto train_stream =
      flatten_with_eos(doc_id_sequences(lm, store, *store_ci, sp.train), lm.eos_id());
  auto valid_stream =
      flatten_with_eos(doc_id_sequences(lm, store, *store_ci, sp.valid), lm.eos_id());

  std::size_t train_b = std::min<std::size_t>(config.batch_size,
                                              std::max<std::size_t>(1, train_stream.size() / 2));
  std::size_t valid_b = std::min<std::size_t>(config.eval_batch_size,
                                              std::max<std::size_t>(1, valid_stream.size() / 2));
  IdMatrix train_ids = batchify(train_stream, train_b);
  IdMatrix valid_ids = batchify(valid_stream, valid_b);

  Rng drop_rng(derive_seed(config.seed, "lmdrop", community_hash(community)));
  AdamState<float> adam = AdamState<float>::shaped(config.layers, lm.dim_,
                                                   config.hidden_size, v + 2u);
  LmParams<float> grads = LmParams<float>::shaped(config.layers, lm.dim_,
                                                  config.hidden_size, v + 2u);

  double best_ppl = std::numeric_limits<double>::infinity();
  LmParams<float> best = lm.net_.params;

  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    auto state = lm.net_.zero_state(train_b);
    double loss_sum = 0;
    std::uint64_t loss_n = 0;
    for (std::size_t off = 0; off + 1 < train_ids.rows; off += config.bptt) {
      std::size_t s = std::min<std::size_t>(config.bptt, train_ids.rows - 1 - off);
      IdMatrix in(s, train_b), tg(s, train_b);
      for (std::size_t t = 0; t < s; ++t)
        for (std::size_t b = 0; b < train_b; ++b) {
          in.at(t, b) = train_ids.at(off + t, b);
          tg.at(t, b) = train_ids.at(off + t + 1, b);
        }
      grads.set_zero();
      float loss = lm.net_.forward_backward(in, tg, state, config.dropout,
                                            config.dropout > 0 ? &drop_rng : nullptr,
                                            grads);
      if (!std::isfinite(loss)) throw DataError("language model training diverged");
      clip_by_norm(grads, config.clip_norm);
      adam_step(lm.net_.params, grads, adam, config.adam_lr);
      loss_sum += static_cast<double>(loss) * static_cast<double>(s * train_b);
      loss_n += s * train_b;
    }

    auto vstate = lm.net_.zero_state(valid_b);
    double nll = 0;
    std::uint64_t cnt = 0;
    for (std::size_t off = 0; off + 1 < valid_ids.rows; off += config.bptt) {
      std::size_t s = std::min<std::size_t>(config.bptt, valid_ids.rows - 1 - off);
      IdMatrix in(s, valid_b), tg(s, valid_b);
      for (std::size_t t = 0; t < s; ++t)
        for (std::size_t b = 0; b < valid_b; ++b) {
          in.at(t, b) = valid_ids.at(off + t, b);
          tg.at(t, b) = valid_ids.at(off + t + 1, b);
        }
      lm.net_.forward_eval(in, tg, vstate, nll, cnt);
    }
    double vppl = std::exp(nll / static_cast<double>(cnt));
    if (!std::isfinite(vppl)) throw DataError("language model training diverged");
    if (log) log->push_back({epoch, loss_sum / static_cast<double>(loss_n), vppl});
    if (vppl < best_ppl) {
      best_ppl = vppl;
      best = lm.net_.params;
    }
  }
  lm.net_.params = std::move(best);
  return lm;
}

double target_perplexity(const LanguageModel& lm, const corpus::CorpusStore& store,
                         std::string_view community, std::string_view word,
                         const float* override_embedding, bool carry_context) {
  auto wid = lm.known_id(word);
  if (!wid)
    throw DataError("word not in language-model vocabulary: " + std::string(word));
  auto ci = store.find_community(community);
  if (!ci) throw DataError("unknown community: " + std::string(community));
  Split sp = split_documents(store, community, lm.config().split_ratios,
                             lm.config().seed);
  auto docs = doc_id_sequences(lm, store, *ci, sp.test);
  ProbeResult r = probe_word(lm.network(), *wid, override_embedding, docs,
                             carry_context);
  if (r.occurrences == 0)
    throw DataError("word absent from test split: " + std::string(word));
  return r.perplexity;
}

double ppl_change(double ppl_train, double ppl_alt) {
  if (!(ppl_train > 0)) throw DataError("baseline perplexity must be positive");
  return (ppl_alt - ppl_train) / ppl_train;
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  if (n == 0) return 0;
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const LanguageModel& model_for(const std::map<std::string, LanguageModel>& models,
                               const std::string& name) {
  auto it = models.find(name);
  if (it == models.end()) throw DataError("missing language model for " + name);
  return it->second;
}

}  // namespace

SubstitutionReport substitution_experiment(
    const vectorspace::EmbeddingSpace& space, const corpus::CorpusStore& store,
    const std::map<std::string, LanguageModel>& models,
    const std::vector<SubstitutionRowSpec>& rows, bool carry_context) {
  SubstitutionReport report;
  const std::string global_name = space.communities()[space.global_index()].name;

  // test-split documents mapped once per (model, community) pairing
  std::map<std::string, std::vector<std::vector<std::uint32_t>>> docs_cache;
  auto docs_for = [&](const LanguageModel& lm, const std::string& community)
      -> const std::vector<std::vector<std::uint32_t>>& {
    std::string key = lm.community() + "\x1f" + community;
    auto it = docs_cache.find(key);
    if (it != docs_cache.end()) return it->second;
    auto ci = store.find_community(community);
    if (!ci) throw DataError("unknown community: " + community);
    Split sp = split_documents(store, community, lm.config().split_ratios,
                               lm.config().seed);
    auto docs = doc_id_sequences(lm, store, *ci, sp.test);
    return docs_cache.emplace(std::move(key), std::move(docs)).first->second;
  };

  auto change_with = [&](const LanguageModel& lm,
                         const std::vector<std::vector<std::uint32_t>>& docs,
                         std::uint32_t wid, double base_ppl,
                         const std::string& word, const std::string& vec_community)
      -> double {
    auto vec = space.vector(word, vec_community);
    ProbeResult r = probe_word(lm.network(), wid, vec.data(), docs, carry_context);
    return ppl_change(base_ppl, r.perplexity);
  };

  for (const auto& spec : rows) {
    SubstitutionRowResult row;
    row.label = spec.label;
    if (spec.members.size() < 2)
      throw DataError("substitution row needs at least two member communities");

    std::vector<double> to_members, to_focus;
    std::vector<std::pair<double, double>> pairs;  // (focus, members)
    std::set<std::string> surviving;

    if (spec.domain_row) {
      row.focus = global_name;
      for (const auto& member : spec.members) {
        const LanguageModel& lm = model_for(models, member);
        const auto& docs = docs_for(lm, member);
        for (const auto& w : spec.words) {
          auto wid = lm.known_id(w);
          if (!wid) {
            row.dropped.push_back(w + "@" + member);
            continue;
          }
          ProbeResult base = probe_word(lm.network(), *wid, nullptr, docs,
                                        carry_context);
          if (base.occurrences == 0 || !(base.perplexity > 0)) {
            row.dropped.push_back(w + "@" + member);
            continue;
          }
          double focus_change =
              change_with(lm, docs, *wid, base.perplexity, w, global_name);
          std::vector<double> sibling_changes;
          for (const auto& other : spec.members) {
            if (other == member) continue;
            sibling_changes.push_back(
                change_with(lm, docs, *wid, base.perplexity, w, other));
          }
          double member_change = 0;
          for (double c : sibling_changes) member_change += c;
          member_change /= static_cast<double>(sibling_changes.size());
          to_focus.push_back(focus_change);
          to_members.push_back(member_change);
          pairs.emplace_back(focus_change, member_change);
          surviving.insert(w);
        }
      }
    } else {
      row.focus = spec.community;
      if (std::find(spec.members.begin(), spec.members.end(), spec.community) ==
          spec.members.end())
        throw DataError("focus community not among members: " + spec.community);
      const LanguageModel& lm = model_for(models, global_name);
      const auto& docs = docs_for(lm, global_name);
      for (const auto& w : spec.words) {
        auto wid = lm.known_id(w);
        if (!wid) {
          row.dropped.push_back(w + "@" + global_name);
          continue;
        }
        ProbeResult base = probe_word(lm.network(), *wid, nullptr, docs,
                                      carry_context);
        if (base.occurrences == 0 || !(base.perplexity > 0)) {
          row.dropped.push_back(w + "@" + global_name);
          continue;
        }
        double focus_change =
            change_with(lm, docs, *wid, base.perplexity, w, spec.community);
        std::vector<double> sibling_changes;
        for (const auto& other : spec.members) {
          if (other == spec.community) continue;
          sibling_changes.push_back(
              change_with(lm, docs, *wid, base.perplexity, w, other));
        }
        double member_change = 0;
        for (double c : sibling_changes) member_change += c;
        member_change /= static_cast<double>(sibling_changes.size());
        to_focus.push_back(focus_change);
        to_members.push_back(member_change);
        pairs.emplace_back(focus_change, member_change);
        surviving.insert(w);
      }
    }

    row.n_words = surviving.size();
    row.n_pairs = pairs.size();
    row.median_to_members = median_of(to_members);
    row.median_to_focus = median_of(to_focus);
    for (const auto& d : row.dropped)
      report.warnings.push_back("dropped " + d + " in row " + row.label);
    if (pairs.size() >= 6) {
      try {
        row.wilcoxon = stats::wilcoxon_signed_rank(pairs);
      } catch (const Error& e) {
        report.warnings.push_back("significance unavailable for row " + row.label +
                                  ": " + e.what());
      }
    } else {
      report.warnings.push_back("significance unavailable for row " + row.label +
                                ": fewer than 6 surviving words");
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_substitution_tsv(const SubstitutionReport& report,
                            const std::filesystem::path& path) {
  io::TsvWriter w(path.string());
  for (std::string_view h :
       {"row", "n_words", "n_pairs", "median_to_members", "median_to_focus",
        "focus", "p_value", "stars", "dropped"})
    w.cell(h);
  w.endrow();
  for (const auto& r : report.rows) {
    w.cell(r.label);
    w.cell(static_cast<std::uint64_t>(r.n_words));
    w.cell(static_cast<std::uint64_t>(r.n_pairs));
    w.cell(r.median_to_members);
    w.cell(r.median_to_focus);
    w.cell(r.focus);
    if (r.wilcoxon) {
      w.cell(r.wilcoxon->p_value);
      w.cell(r.wilcoxon->stars);
    } else {
      w.cell(std::string_view("unavailable"));
      w.cell(std::string_view(""));
    }
    std::string joined;
    for (const auto& d : r.dropped) {
      if (!joined.empty()) joined += ';';
      joined += d;
    }
    w.cell(joined);
    w.endrow();
  }
  w.finish();
}

}  // namespace commshift::lmeval
