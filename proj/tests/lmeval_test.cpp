#include <doctest.h>

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "commshift/corpus.hpp"
#include "commshift/error.hpp"
#include "commshift/io.hpp"
#include "commshift/lmeval.hpp"
#include "commshift/rng.hpp"
#include "commshift/vectorspace.hpp"
#include "test_util.hpp"

using namespace commshift;
using lmeval::IdMatrix;
using lmeval::LanguageModel;
using lmeval::LmNetwork;
using lmeval::LmParams;

namespace {

constexpr std::uint64_t kLmSeed = 5;
constexpr std::array<double, 3> kRatios{0.8, 0.1, 0.1};
constexpr std::size_t kDocs = 40;

// Every document walks the six-word cycle twice (so "ping" is always followed
// by "pong") plus a community-flavored tail; "rare" lands only in one train
// document per community, never in a test split.
corpus::CorpusStore lm_store() {
  auto build = [](const std::set<std::pair<std::size_t, std::uint32_t>>& rare_at) {
    corpus::CorpusStore store(testutil::two_members_plus_global());
    const std::array<std::string, 6> cycle{"ping", "pong", "tick",
                                           "tock", "red",  "blue"};
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::uint32_t i = 0; i < kDocs; ++i) {
        std::vector<std::string> toks;
        std::size_t r = (i * 5 + c) % 6;
        for (int k = 0; k < 12; ++k) toks.push_back(cycle[(r + k) % 6]);
        const char* flavor = c == 0 ? "red" : c == 1 ? "blue" : i % 2 ? "red" : "blue";
        toks.insert(toks.end(), {flavor, flavor, "ping", "pong"});
        if (rare_at.count({c, i})) toks.push_back("rare");
        store.add_document(c, "a" + std::to_string(i % 4), toks);
      }
    }
    store.rebuild_counts();
    return store;
  };
  corpus::CorpusStore probe = build({});
  std::set<std::pair<std::size_t, std::uint32_t>> rare_at;
  for (const char* name : {"alpha", "beta", "global"}) {
    auto sp = lmeval::split_documents(probe, name, kRatios, kLmSeed);
    rare_at.insert({*probe.find_community(name), sp.train.front()});
  }
  return build(rare_at);
}

lmeval::LMConfig lm_config(std::uint64_t seed = kLmSeed) {
  lmeval::LMConfig c;
  c.layers = 1;
  c.hidden_size = 8;
  c.epochs = 30;
  c.adam_lr = 3e-3f;
  c.dropout = 0.1f;
  c.batch_size = 4;
  c.bptt = 8;
  c.eval_batch_size = 2;
  c.split_ratios = kRatios;
  c.seed = seed;
  return c;
}

struct LmFixture {
  corpus::CorpusStore store = lm_store();
  corpus::Vocabulary vocab = corpus::Vocabulary::build(store, 1);
  vectorspace::EmbeddingSpace space = vectorspace::train(store, vocab, space_config());
  LanguageModel alpha, beta, global;
  std::vector<lmeval::EpochLog> alpha_log;

  static vectorspace::TrainingConfig space_config() {
    vectorspace::TrainingConfig tc;
    tc.dim = 8;
    tc.window = 2;
    tc.negatives = 3;
    tc.epochs = 3;
    tc.learning_rate = 0.05f;
    tc.l2_lambda = 1e-4f;
    tc.seed = 3;
    return tc;
  }

  LmFixture() {
    alpha = lmeval::train_lm(store, space, "alpha", lm_config(), &alpha_log);
    beta = lmeval::train_lm(store, space, "beta", lm_config());
    global = lmeval::train_lm(store, space, "global", lm_config());
  }
};

const LmFixture& fx() {
  static LmFixture f;
  return f;
}

template <typename Fill>
void fill_params(LmParams<double>& p, Fill&& f) {
  p.visit([&](Eigen::MatrixXd& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = f();
  });
}

// double-precision reimplementation of one zero-state recurrent step plus
// log-softmax, straight from the gate equations
Eigen::VectorXd oracle_logprobs(const LmNetwork<float>& net, const Eigen::VectorXd& x0) {
  auto H = static_cast<Eigen::Index>(net.hidden());
  Eigen::VectorXd x = x0;
  std::vector<Eigen::VectorXd> h(net.n_layers(), Eigen::VectorXd::Zero(H));
  std::vector<Eigen::VectorXd> c(net.n_layers(), Eigen::VectorXd::Zero(H));
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const auto& L = net.params.layers[l];
    Eigen::VectorXd a = L.wx.cast<double>() * x + L.wh.cast<double>() * h[l] +
                        L.b.cast<double>();
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (Eigen::Index i = 0; i < H; ++i) {
      double gi = sig(a[i]);
      double gf = sig(a[H + i]);
      double gg = std::tanh(a[2 * H + i]);
      double go = sig(a[3 * H + i]);
      c[l][i] = gf * c[l][i] + gi * gg;
      h[l][i] = go * std::tanh(c[l][i]);
    }
    x = h[l];
  }
  Eigen::VectorXd logits = net.params.proj.cast<double>() * x +
                           net.params.proj_b.cast<double>();
  double mx = logits.maxCoeff();
  double z = std::log((logits.array() - mx).exp().sum()) + mx;
  return (logits.array() - z).matrix();
}

}  // namespace

TEST_CASE("document split is deterministic disjoint and validated") {
  auto store = lm_store();
  auto sp = lmeval::split_documents(store, "alpha", kRatios, kLmSeed);
  CHECK(sp.train.size() == 32);
  CHECK(sp.valid.size() == 4);
  CHECK(sp.test.size() == 4);

  std::vector<std::uint32_t> all;
  for (const auto* part : {&sp.train, &sp.valid, &sp.test})
    all.insert(all.end(), part->begin(), part->end());
  std::sort(all.begin(), all.end());
  for (std::uint32_t i = 0; i < kDocs; ++i) CHECK(all[i] == i);

  auto again = lmeval::split_documents(store, "alpha", kRatios, kLmSeed);
  CHECK(again.train == sp.train);
  CHECK(again.test == sp.test);
  auto other_seed = lmeval::split_documents(store, "alpha", kRatios, kLmSeed + 1);
  CHECK(other_seed.train != sp.train);
  auto other_comm = lmeval::split_documents(store, "beta", kRatios, kLmSeed);
  CHECK(other_comm.train != sp.train);

  CHECK_THROWS_AS(lmeval::split_documents(store, "nope", kRatios, kLmSeed), DataError);
  CHECK_THROWS_AS(lmeval::split_documents(store, "alpha", {0.5, 0.4, 0.2}, kLmSeed),
                  DataError);
  CHECK_THROWS_AS(lmeval::split_documents(store, "alpha", {1.1, -0.2, 0.1}, kLmSeed),
                  DataError);
  CHECK_THROWS_AS(lmeval::split_documents(store, "alpha", {0.98, 0.01, 0.01}, kLmSeed),
                  DataError);
}

TEST_CASE("recurrent network gradients match finite differences") {
  LmNetwork<double> net(2, 3, 4, 5);
  Rng rng(99);
  fill_params(net.params, [&] { return rng.uniform(-0.6, 0.6); });
  for (Eigen::Index j = 0; j < net.embedding.cols(); ++j)
    for (Eigen::Index i = 0; i < net.embedding.rows(); ++i)
      net.embedding(i, j) = rng.uniform(-0.6, 0.6);

  const std::size_t S = 3, B = 2;
  IdMatrix in(S, B), tg(S, B);
  for (std::size_t t = 0; t < S; ++t)
    for (std::size_t b = 0; b < B; ++b) {
      in.at(t, b) = static_cast<std::uint32_t>(rng.below(5));
      tg.at(t, b) = static_cast<std::uint32_t>(rng.below(5));
    }

  auto loss_at = [&] {
    auto st = net.zero_state(B);
    auto g = LmParams<double>::shaped(2, 3, 4, 5);
    return net.forward_backward(in, tg, st, 0.0, nullptr, g);
  };

  auto grads = LmParams<double>::shaped(2, 3, 4, 5);
  auto st = net.zero_state(B);
  double base = net.forward_backward(in, tg, st, 0.0, nullptr, grads);
  CHECK(std::isfinite(base));
  CHECK(st.h[0].norm() > 0);

  double nll_sum = 0;
  std::uint64_t count = 0;
  auto est = net.zero_state(B);
  net.forward_eval(in, tg, est, nll_sum, count);
  CHECK(count == S * B);
  CHECK(nll_sum / double(count) == doctest::Approx(base).epsilon(1e-12));

  std::vector<Eigen::MatrixXd*> pm, gm;
  net.params.visit([&](Eigen::MatrixXd& m) { pm.push_back(&m); });
  grads.visit([&](Eigen::MatrixXd& m) { gm.push_back(&m); });
  REQUIRE(pm.size() == gm.size());
  const double eps = 1e-5;
  for (std::size_t k = 0; k < pm.size(); ++k)
    for (Eigen::Index j = 0; j < pm[k]->cols(); ++j)
      for (Eigen::Index i = 0; i < pm[k]->rows(); ++i) {
        double saved = (*pm[k])(i, j);
        (*pm[k])(i, j) = saved + eps;
        double up = loss_at();
        (*pm[k])(i, j) = saved - eps;
        double down = loss_at();
        (*pm[k])(i, j) = saved;
        double fd = (up - down) / (2 * eps);
        double an = (*gm[k])(i, j);
        CHECK(std::fabs(fd - an) <= 1e-7 + 1e-5 * std::fabs(an));
      }
}

TEST_CASE("zero dropout ignores the rng and zero parameters predict uniformly") {
  LmNetwork<double> net(1, 3, 4, 6);
  Rng rng(4);
  fill_params(net.params, [&] { return rng.uniform(-0.5, 0.5); });
  for (Eigen::Index j = 0; j < net.embedding.cols(); ++j)
    for (Eigen::Index i = 0; i < net.embedding.rows(); ++i)
      net.embedding(i, j) = rng.uniform(-0.5, 0.5);
  IdMatrix in(2, 2), tg(2, 2);
  in.at(0, 0) = 1; in.at(0, 1) = 2; in.at(1, 0) = 3; in.at(1, 1) = 4;
  tg.at(0, 0) = 5; tg.at(0, 1) = 0; tg.at(1, 0) = 2; tg.at(1, 1) = 1;

  auto g1 = LmParams<double>::shaped(1, 3, 4, 6);
  auto g2 = LmParams<double>::shaped(1, 3, 4, 6);
  auto s1 = net.zero_state(2);
  auto s2 = net.zero_state(2);
  Rng drop(7);
  double with_rng = net.forward_backward(in, tg, s1, 0.0, &drop, g1);
  double without = net.forward_backward(in, tg, s2, 0.0, nullptr, g2);
  CHECK(with_rng == without);
  CHECK(g1.proj.cwiseEqual(g2.proj).all());
  CHECK(g1.layers[0].wx.cwiseEqual(g2.layers[0].wx).all());
  CHECK(drop.uniform() == Rng(7).uniform());  // mask generation consumed nothing

  LmNetwork<double> zero(1, 3, 4, 7);
  auto state = zero.zero_state(1);
  Eigen::VectorXd lp = oracle_logprobs(LmNetwork<float>(1, 3, 4, 7),
                                       Eigen::VectorXd::Zero(3));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  auto got = zero.step_logprobs(x, state);
  for (Eigen::Index i = 0; i < 7; ++i) {
    CHECK(got[i] == doctest::Approx(-std::log(7.0)).epsilon(1e-12));
    CHECK(got[i] == doctest::Approx(lp[i]).epsilon(1e-12));
  }

  double nll = 0;
  std::uint64_t cnt = 0;
  IdMatrix zin(3, 1), ztg(3, 1);
  for (std::size_t t = 0; t < 3; ++t) {
    zin.at(t, 0) = static_cast<std::uint32_t>(t);
    ztg.at(t, 0) = static_cast<std::uint32_t>(6 - t);
  }
  auto zs = zero.zero_state(1);
  zero.forward_eval(zin, ztg, zs, nll, cnt);
  CHECK(std::exp(nll / double(cnt)) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("step logprobs normalize and share the hidden update") {
  LmNetwork<double> net(2, 3, 4, 5);
  Rng rng(11);
  fill_params(net.params, [&] { return rng.uniform(-0.8, 0.8); });
  Eigen::VectorXd x(3);
  x << 0.3, -0.2, 0.9;

  auto s1 = net.zero_state(1);
  auto s2 = net.zero_state(1);
  auto lp = net.step_logprobs(x, s1);
  net.step_hidden(x, s2);
  CHECK(lp.array().exp().sum() == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(s1.h[l].cwiseEqual(s2.h[l]).all());
    CHECK(s1.c[l].cwiseEqual(s2.c[l]).all());
  }
}

TEST_CASE("gradient clipping and adam steps") {
  auto g = LmParams<double>::shaped(1, 2, 3, 4);
  fill_params(g, [] { return 3.0; });
  std::size_t elems = 0;
  g.visit([&](const Eigen::MatrixXd& m) { elems += m.size(); });
  CHECK(lmeval::global_norm(g) == doctest::Approx(3.0 * std::sqrt(double(elems))));

  lmeval::clip_by_norm(g, 1.0);
  CHECK(lmeval::global_norm(g) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.proj(0, 0) == doctest::Approx(1.0 / std::sqrt(double(elems))).epsilon(1e-12));

  auto small = LmParams<double>::shaped(1, 2, 3, 4);
  fill_params(small, [] { return 0.001; });
  lmeval::clip_by_norm(small, 10.0);
  CHECK(small.proj(0, 0) == 0.001);

  auto p = LmParams<double>::shaped(1, 2, 3, 4);
  auto grad = LmParams<double>::shaped(1, 2, 3, 4);
  fill_params(grad, [] { return 3.0; });
  auto st = lmeval::AdamState<double>::shaped(1, 2, 3, 4);
  lmeval::adam_step(p, grad, st, 0.1);
  CHECK(st.t == 1);
  // first bias-corrected step is lr * g / (|g| + eps), i.e. nearly -lr
  CHECK(p.proj(1, 2) == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(p.layers[0].wh(4, 1) == doctest::Approx(-0.1).epsilon(1e-6));
  lmeval::adam_step(p, grad, st, 0.1);
  CHECK(st.t == 2);
}

TEST_CASE("language model training learns successor structure") {
  const auto& f = fx();
  CHECK(f.alpha.community() == "alpha");
  CHECK(f.alpha.vocab_size() == 7);  // six cycle words plus "rare"
  CHECK(f.alpha.unk_id() == 7);
  CHECK(f.alpha.eos_id() == 8);
  CHECK(f.alpha.dim() == 8);
  CHECK(f.alpha.token_id("ping") == *f.alpha.known_id("ping"));
  CHECK(f.alpha.token_id("nonsense") == f.alpha.unk_id());
  CHECK(!f.alpha.known_id("nonsense").has_value());

  // frozen input embedding rows are the community-composed vectors
  auto vec = f.space.vector("pong", "alpha");
  auto id = *f.alpha.known_id("pong");
  for (std::uint32_t i = 0; i < 8; ++i)
    CHECK(f.alpha.network().embedding(i, id) == vec[i]);

  REQUIRE(f.alpha_log.size() == lm_config().epochs);
  CHECK(f.alpha_log.front().train_loss > f.alpha_log.back().train_loss);
  for (const auto& e : f.alpha_log) CHECK(std::isfinite(e.valid_perplexity));

  // "ping" is always followed by "pong", so its successor perplexity must
  // fall far below the uniform baseline of vocab_size + 2
  double ppl = lmeval::target_perplexity(f.alpha, f.store, "alpha", "ping");
  CHECK(ppl >= 1.0);
  CHECK(ppl < 3.5);

  CHECK_THROWS_AS(lmeval::train_lm(f.store, f.space, "nope", lm_config()), DataError);
  auto bad = lm_config();
  bad.hidden_size = 16;  // embedding dimension is 8
  CHECK_THROWS_AS(lmeval::train_lm(f.store, f.space, "alpha", bad), DataError);
  bad = lm_config();
  bad.layers = 0;
  CHECK_THROWS_AS(lmeval::train_lm(f.store, f.space, "alpha", bad), DataError);
  bad = lm_config();
  bad.batch_size = 0;
  CHECK_THROWS_AS(lmeval::train_lm(f.store, f.space, "alpha", bad), DataError);
}

TEST_CASE("target perplexity matches an independent single-step oracle") {
  const auto& f = fx();
  const auto& lm = f.alpha;
  auto wid = *lm.known_id("ping");

  auto sp = lmeval::split_documents(f.store, "alpha", kRatios, kLmSeed);
  auto ci = *f.store.find_community("alpha");
  Eigen::VectorXd x = lm.network().embedding.col(wid).cast<double>();
  Eigen::VectorXd lp = oracle_logprobs(lm.network(), x);

  double nll = 0;
  std::size_t n = 0;
  for (std::uint32_t di : sp.test) {
    const auto& d = f.store.documents(ci)[di];
    for (std::size_t i = 0; i + 1 < d.tokens.size(); ++i)
      if (lm.token_id(f.store.word(d.tokens[i])) == wid) {
        nll -= lp[lm.token_id(f.store.word(d.tokens[i + 1]))];
        ++n;
      }
  }
  REQUIRE(n > 0);
  double expected = std::exp(nll / double(n));
  double got = lmeval::target_perplexity(lm, f.store, "alpha", "ping");
  CHECK(got == doctest::Approx(expected).epsilon(2e-3));
}

TEST_CASE("target perplexity override and error handling") {
  const auto& f = fx();
  double base = lmeval::target_perplexity(f.alpha, f.store, "alpha", "ping");

  auto own = f.space.vector("ping", "alpha");
  double same = lmeval::target_perplexity(f.alpha, f.store, "alpha", "ping",
                                          own.data());
  CHECK(same == base);  // substituting the embedding already in place

  std::vector<float> shifted(own);
  for (float& v : shifted) v += 1.5f;
  double moved = lmeval::target_perplexity(f.alpha, f.store, "alpha", "ping",
                                           shifted.data());
  CHECK(moved != base);

  double carry = lmeval::target_perplexity(f.alpha, f.store, "alpha", "ping",
                                           nullptr, true);
  CHECK(std::isfinite(carry));
  CHECK(carry > 0);
  double carry_same = lmeval::target_perplexity(f.alpha, f.store, "alpha", "ping",
                                                own.data(), true);
  CHECK(carry_same == carry);

  CHECK_THROWS_AS(
      lmeval::target_perplexity(f.alpha, f.store, "alpha", "nonsense"), DataError);
  CHECK_THROWS_AS(lmeval::target_perplexity(f.alpha, f.store, "nope", "ping"),
                  DataError);
  // "rare" is in the vocabulary but only ever occurs in one train document
  CHECK_THROWS_AS(lmeval::target_perplexity(f.alpha, f.store, "alpha", "rare"),
                  DataError);

  CHECK(lmeval::ppl_change(2.0, 3.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(lmeval::ppl_change(4.0, 3.0) == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK_THROWS_AS(lmeval::ppl_change(0.0, 3.0), DataError);
  CHECK_THROWS_AS(lmeval::ppl_change(-1.0, 3.0), DataError);
}

TEST_CASE("language model persistence round trips") {
  const auto& f = fx();
  testutil::TempDir dir;
  auto path = dir.path() / "alpha.lm";
  f.alpha.save(path);
  f.alpha.save(dir.path() / "alpha2.lm");
  CHECK(io::file_digest_hex(path.string()) ==
        io::file_digest_hex((dir.path() / "alpha2.lm").string()));

  auto loaded = LanguageModel::load(path);
  CHECK(loaded.community() == "alpha");
  CHECK(loaded.vocab_size() == f.alpha.vocab_size());
  CHECK(loaded.words() == f.alpha.words());
  CHECK(loaded.dim() == f.alpha.dim());
  CHECK(loaded.config().epochs == lm_config().epochs);
  CHECK(loaded.config().seed == kLmSeed);
  CHECK(loaded.config().split_ratios == kRatios);
  CHECK(loaded.token_id("ping") == f.alpha.token_id("ping"));
  CHECK(loaded.network().embedding.cwiseEqual(f.alpha.network().embedding).all());
  CHECK(loaded.network().params.proj.cwiseEqual(f.alpha.network().params.proj).all());
  CHECK(loaded.network().params.layers[0].wx
            .cwiseEqual(f.alpha.network().params.layers[0].wx)
            .all());

  double before = lmeval::target_perplexity(f.alpha, f.store, "alpha", "ping");
  double after = lmeval::target_perplexity(loaded, f.store, "alpha", "ping");
  CHECK(before == after);

  // retraining with the same configuration reproduces the container bytes
  auto again = lmeval::train_lm(f.store, f.space, "alpha", lm_config());
  again.save(dir.path() / "retrain.lm");
  CHECK(io::file_digest_hex(path.string()) ==
        io::file_digest_hex((dir.path() / "retrain.lm").string()));
  auto reseeded = lmeval::train_lm(f.store, f.space, "alpha", lm_config(kLmSeed + 1));
  reseeded.save(dir.path() / "reseeded.lm");
  CHECK(io::file_digest_hex(path.string()) !=
        io::file_digest_hex((dir.path() / "reseeded.lm").string()));

  io::BinaryWriter w("cshwrong", 1);
  w.u32(0);
  w.finish((dir.path() / "bad.lm").string());
  CHECK_THROWS_AS(LanguageModel::load(dir.path() / "bad.lm"), DataError);
  CHECK_THROWS_AS(LanguageModel::load(dir.path() / "missing.lm"), DataError);
}

TEST_CASE("substitution experiment builds rows and reports drops") {
  const auto& f = fx();
  std::map<std::string, LanguageModel> models;
  models["alpha"] = f.alpha;
  models["beta"] = f.beta;
  models["global"] = f.global;

  std::vector<lmeval::SubstitutionRowSpec> specs(2);
  specs[0].label = "domain";
  specs[0].domain_row = true;
  specs[0].members = {"alpha", "beta"};
  specs[0].words = {"ping", "pong", "tick", "tock", "red", "blue"};
  specs[1].label = "comm";
  specs[1].domain_row = false;
  specs[1].community = "alpha";
  specs[1].members = {"alpha", "beta"};
  specs[1].words = {"ping", "tick", "zzmissing"};

  auto report = lmeval::substitution_experiment(f.space, f.store, models, specs);
  REQUIRE(report.rows.size() == 2);

  const auto& dom = report.rows[0];
  CHECK(dom.label == "domain");
  CHECK(dom.focus == "global");
  CHECK(dom.n_words == 6);
  CHECK(dom.n_pairs == 12);
  CHECK(dom.dropped.empty());
  CHECK(dom.wilcoxon.has_value());

  const auto& comm = report.rows[1];
  CHECK(comm.focus == "alpha");
  CHECK(comm.n_words == 2);
  CHECK(comm.n_pairs == 2);
  REQUIRE(comm.dropped.size() == 1);
  CHECK(comm.dropped[0] == "zzmissing@global");
  CHECK(!comm.wilcoxon.has_value());

  bool saw_drop = false, saw_small = false;
  for (const auto& wmsg : report.warnings) {
    if (wmsg.find("zzmissing@global") != std::string::npos) saw_drop = true;
    if (wmsg.find("fewer than 6") != std::string::npos &&
        wmsg.find("comm") != std::string::npos)
      saw_small = true;
  }
  CHECK(saw_drop);
  CHECK(saw_small);

  // single-word domain row medians agree with direct perplexity probes
  std::vector<lmeval::SubstitutionRowSpec> one(1);
  one[0].label = "solo";
  one[0].domain_row = true;
  one[0].members = {"alpha", "beta"};
  one[0].words = {"ping"};
  auto solo = lmeval::substitution_experiment(f.space, f.store, models, one);
  REQUIRE(solo.rows.size() == 1);
  CHECK(solo.rows[0].n_pairs == 2);
  CHECK(!solo.rows[0].wilcoxon.has_value());

  auto change_for = [&](const LanguageModel& lm, const std::string& comm_name,
                        const std::string& vec_comm) {
    double base = lmeval::target_perplexity(lm, f.store, comm_name, "ping");
    auto v = f.space.vector("ping", vec_comm);
    double alt =
        lmeval::target_perplexity(lm, f.store, comm_name, "ping", v.data());
    return lmeval::ppl_change(base, alt);
  };
  double fa = change_for(f.alpha, "alpha", "global");
  double fb = change_for(f.beta, "beta", "global");
  double ma = change_for(f.alpha, "alpha", "beta");
  double mb = change_for(f.beta, "beta", "alpha");
  CHECK(solo.rows[0].median_to_focus ==
        doctest::Approx(0.5 * (fa + fb)).epsilon(1e-12));
  CHECK(solo.rows[0].median_to_members ==
        doctest::Approx(0.5 * (ma + mb)).epsilon(1e-12));

  auto bad = specs;
  bad[0].members = {"alpha"};
  CHECK_THROWS_AS(lmeval::substitution_experiment(f.space, f.store, models, bad),
                  DataError);
  bad = specs;
  bad[1].community = "gamma";
  CHECK_THROWS_AS(lmeval::substitution_experiment(f.space, f.store, models, bad),
                  DataError);
  std::map<std::string, LanguageModel> missing;
  missing["alpha"] = f.alpha;
  missing["global"] = f.global;
  CHECK_THROWS_AS(
      lmeval::substitution_experiment(f.space, f.store, missing, specs), DataError);

  testutil::TempDir dir;
  auto tsv = dir.path() / "subst.tsv";
  lmeval::write_substitution_tsv(report, tsv);
  auto rows = io::read_tsv(tsv.string());
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"row", "n_words", "n_pairs",
                                            "median_to_members", "median_to_focus",
                                            "focus", "p_value", "stars", "dropped"});
  CHECK(rows[1][0] == "domain");
  CHECK(rows[1][1] == "6");
  CHECK(rows[1][8].empty());
  CHECK(rows[2][0] == "comm");
  CHECK(rows[2][6] == "unavailable");
  CHECK(rows[2][8] == "zzmissing@global");
}
