#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>
#include <vector>

#include "commshift/corpus.hpp"
#include "commshift/error.hpp"
#include "commshift/io.hpp"
#include "commshift/rng.hpp"
#include "commshift/sgns.hpp"
#include "commshift/vectorspace.hpp"
#include "test_util.hpp"

using namespace commshift;
using corpus::CorpusStore;
using corpus::Vocabulary;
using vectorspace::EmbeddingSpace;
using vectorspace::TrainingConfig;

namespace {

// River senses of "bank" in alpha, money senses in beta, both in global.
CorpusStore bank_store() {
  CorpusStore store(testutil::two_members_plus_global());
  auto river = testutil::words({"bank", "river", "water", "stream"});
  auto money = testutil::words({"bank", "money", "cash", "loan"});
  auto river_only = testutil::words({"river", "water", "stream"});
  auto money_only = testutil::words({"money", "cash", "loan"});
  for (int i = 0; i < 150; ++i) {
    store.add_document(0, "a", river);
    store.add_document(1, "b", money);
  }
  for (int i = 0; i < 30; ++i) {
    store.add_document(0, "a", money_only);  // keeps money words in alpha's vocabulary
    store.add_document(1, "b", river_only);
  }
  for (int i = 0; i < 60; ++i) {
    store.add_document(2, "g", river);
    store.add_document(2, "g", money);
  }
  store.rebuild_counts();
  return store;
}

TrainingConfig small_config(std::uint64_t seed = 7, float lambda = 1e-4f) {
  TrainingConfig tc;
  tc.dim = 16;
  tc.window = 3;
  tc.negatives = 5;
  tc.epochs = 10;
  tc.learning_rate = 0.05f;
  tc.l2_lambda = lambda;
  tc.seed = seed;
  return tc;
}

double squared_deviation_mass(const EmbeddingSpace& s) {
  double sum = 0;
  for (std::size_t c = 0; c < s.communities().size(); ++c)
    for (std::uint32_t w = 0; w < s.vocab().size(); ++w)
      for (float x : s.deviation_row(c, w)) sum += double(x) * x;
  return sum;
}

}  // namespace

TEST_CASE("sgns step with unit rate reproduces analytic gradients") {
  constexpr std::size_t dim = 7, n = 5;
  const double lambda = 0.3;
  Rng rng(42);
  std::vector<double> main(dim), dev(dim), h(dim), gh(dim);
  std::vector<std::vector<double>> ctx(n, std::vector<double>(dim));
  for (auto& x : main) x = rng.uniform(-1.0, 1.0);
  for (auto& x : dev) x = rng.uniform(-1.0, 1.0);
  for (auto& row : ctx)
    for (auto& x : row) x = rng.uniform(-1.0, 1.0);
  const int labels[n] = {1, 0, 0, 1, 0};

  // gradients as old - new after one lr=1 step; ctx rows must be distinct
  auto main2 = main;
  auto dev2 = dev;
  auto ctx2 = ctx;
  std::vector<double*> rows(n);
  for (std::size_t j = 0; j < n; ++j) rows[j] = ctx2[j].data();
  vectorspace::sgns_step<double>(main2.data(), dev2.data(), rows.data(), labels, n, dim, 1.0,
                                 lambda, h.data(), gh.data());

  std::vector<const double*> crows(n);
  for (std::size_t j = 0; j < n; ++j) crows[j] = ctx[j].data();
  auto loss = [&](const std::vector<double>& m, const std::vector<double>& d,
                  const std::vector<std::vector<double>>& c) {
    std::vector<const double*> r(n);
    for (std::size_t j = 0; j < n; ++j) r[j] = c[j].data();
    return vectorspace::sgns_loss<double>(m.data(), d.data(), r.data(), labels, n, dim, lambda);
  };

  const double eps = 1e-6;
  auto check_grad = [&](double analytic, double plus, double minus) {
    double fd = (plus - minus) / (2 * eps);
    CHECK(std::abs(analytic - fd) <= 1e-6 * std::max({1.0, std::abs(analytic), std::abs(fd)}));
  };
  for (std::size_t i = 0; i < dim; ++i) {
    auto mp = main, mm = main;
    mp[i] += eps;
    mm[i] -= eps;
    check_grad(main[i] - main2[i], loss(mp, dev, ctx), loss(mm, dev, ctx));

    auto dp = dev, dm = dev;
    dp[i] += eps;
    dm[i] -= eps;
    check_grad(dev[i] - dev2[i], loss(main, dp, ctx), loss(main, dm, ctx));
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < dim; ++i) {
      auto cp = ctx, cm = ctx;
      cp[j][i] += eps;
      cm[j][i] -= eps;
      check_grad(ctx[j][i] - ctx2[j][i], loss(main, dev, cp), loss(main, dev, cm));
    }
  }
}

TEST_CASE("fresh space has random main rows and zero deviation and context rows") {
  auto store = bank_store();
  auto vocab = Vocabulary::build(store, 2);
  auto tc = small_config();
  EmbeddingSpace space(vocab, store.communities(), tc);

  float bound = 0.5f / float(tc.dim);
  bool any_nonzero = false;
  for (std::uint32_t w = 0; w < vocab.size(); ++w) {
    for (float x : space.main_row(w)) {
      CHECK(std::abs(x) <= bound);
      if (x != 0.0f) any_nonzero = true;
    }
    for (float x : space.context_row(w)) CHECK(x == 0.0f);
    for (std::size_t c = 0; c < 3; ++c)
      for (float x : space.deviation_row(c, w)) CHECK(x == 0.0f);
  }
  CHECK(any_nonzero);
  CHECK_THROWS_AS(EmbeddingSpace(vocab, {}, tc), DataError);
  auto bad = tc;
  bad.dim = 0;
  CHECK_THROWS_AS(EmbeddingSpace(vocab, store.communities(), bad), UsageError);
}

TEST_CASE("composed vector is main plus deviation") {
  auto store = bank_store();
  auto vocab = Vocabulary::build(store, 2);
  auto space = vectorspace::train(store, vocab, small_config());

  auto id = *vocab.id("bank");
  auto m = space.main_row(id);
  auto d = space.deviation_row(0, id);
  auto v = space.vector("bank", "alpha");
  REQUIRE(v.size() == m.size());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == m[i] + d[i]);

  CHECK_THROWS_AS(space.vector("nope", "alpha"), DataError);
  CHECK_THROWS_AS(space.vector("bank", "nope"), DataError);
}

TEST_CASE("training separates the senses of an ambiguous word by community") {
  auto store = bank_store();
  auto vocab = Vocabulary::build(store, 2);
  auto space = vectorspace::train(store, vocab, small_config());

  auto bank_alpha = space.vector("bank", "alpha");
  auto bank_beta = space.vector("bank", "beta");
  auto water_a = space.vector("water", "alpha");
  auto cash_a = space.vector("cash", "alpha");
  auto water_b = space.vector("water", "beta");
  auto cash_b = space.vector("cash", "beta");

  CHECK(vectorspace::cosine(bank_alpha, water_a) > vectorspace::cosine(bank_alpha, cash_a));
  CHECK(vectorspace::cosine(bank_beta, cash_b) > vectorspace::cosine(bank_beta, water_b));
  // the deviation tables moved: community vectors differ from each other
  CHECK(vectorspace::cosine(bank_alpha, bank_beta) < 0.999);
}

TEST_CASE("stronger deviation penalty shrinks the deviation tables") {
  auto store = bank_store();
  auto vocab = Vocabulary::build(store, 2);
  auto loose = vectorspace::train(store, vocab, small_config(7, 0.0f));
  auto tight = vectorspace::train(store, vocab, small_config(7, 0.3f));
  CHECK(squared_deviation_mass(loose) > 0.0);
  CHECK(squared_deviation_mass(tight) < 0.5 * squared_deviation_mass(loose));
}

TEST_CASE("training is bit-identical for a fixed seed") {
  auto store = bank_store();
  auto vocab = Vocabulary::build(store, 2);
  auto a = vectorspace::train(store, vocab, small_config(11));
  auto b = vectorspace::train(store, vocab, small_config(11));
  auto c = vectorspace::train(store, vocab, small_config(12));

  bool same = true, differs = false;
  for (std::uint32_t w = 0; w < vocab.size(); ++w) {
    auto ra = a.main_row(w), rb = b.main_row(w), rc = c.main_row(w);
    for (std::size_t i = 0; i < ra.size(); ++i) {
      if (ra[i] != rb[i]) same = false;
      if (ra[i] != rc[i]) differs = true;
    }
    for (std::size_t cm = 0; cm < 3; ++cm) {
      auto da = a.deviation_row(cm, w), db = b.deviation_row(cm, w);
      for (std::size_t i = 0; i < da.size(); ++i)
        if (da[i] != db[i]) same = false;
    }
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("training with no usable documents returns the initial space") {
  CorpusStore store(testutil::two_members_plus_global());
  // every document is a single token, so no context pairs exist
  for (std::size_t c = 0; c < 3; ++c)
    for (int i = 0; i < 3; ++i) store.add_document(c, "u", testutil::words({"only"}));
  store.rebuild_counts();
  auto vocab = Vocabulary::build(store, 1);
  auto space = vectorspace::train(store, vocab, small_config());
  CHECK(squared_deviation_mass(space) == 0.0);
}

TEST_CASE("space save and load round trip") {
  testutil::TempDir tmp;
  auto store = bank_store();
  auto vocab = Vocabulary::build(store, 2);
  auto tc = small_config();
  tc.epochs = 2;
  auto space = vectorspace::train(store, vocab, tc);
  auto path = tmp.file("s.space");
  space.save(path);
  auto back = EmbeddingSpace::load(path);

  CHECK(back.dim() == space.dim());
  CHECK(back.vocab().size() == space.vocab().size());
  CHECK(back.vocab().word(0) == space.vocab().word(0));
  CHECK(back.vocab().min_count() == 2);
  CHECK(back.config().window == tc.window);
  CHECK(back.config().seed == tc.seed);
  REQUIRE(back.communities().size() == 3);
  CHECK(back.communities()[2].kind == corpus::CommunityKind::global);
  for (std::uint32_t w = 0; w < vocab.size(); ++w) {
    auto ma = space.main_row(w), mb = back.main_row(w);
    auto ca = space.context_row(w), cb = back.context_row(w);
    for (std::size_t i = 0; i < ma.size(); ++i) {
      CHECK(ma[i] == mb[i]);
      CHECK(ca[i] == cb[i]);
    }
    for (std::size_t c = 0; c < 3; ++c) {
      auto da = space.deviation_row(c, w), db = back.deviation_row(c, w);
      for (std::size_t i = 0; i < da.size(); ++i) CHECK(da[i] == db[i]);
    }
  }
  CHECK_THROWS_AS(EmbeddingSpace::load(tmp.file("missing.space")), DataError);
}

TEST_CASE("text export writes main, deviation and composed tables") {
  testutil::TempDir tmp;
  auto store = bank_store();
  auto vocab = Vocabulary::build(store, 2);
  auto tc = small_config();
  tc.epochs = 1;
  auto space = vectorspace::train(store, vocab, tc);
  auto dir = tmp.file("txt");
  space.export_text(dir);

  for (const char* name : {"main.txt", "dev_alpha.txt", "dev_beta.txt", "dev_global.txt",
                           "composed_alpha.txt", "composed_beta.txt", "composed_global.txt"})
    CHECK(io::file_exists(dir + "/" + std::string(name)));

  std::istringstream main_txt(io::read_text(dir + "/main.txt"));
  std::istringstream comp_txt(io::read_text(dir + "/composed_alpha.txt"));
  std::size_t nv, nd;
  main_txt >> nv >> nd;
  CHECK(nv == vocab.size());
  CHECK(nd == tc.dim);
  comp_txt >> nv >> nd;
  std::string w1, w2;
  main_txt >> w1;
  comp_txt >> w2;
  CHECK(w1 == vocab.word(0));
  CHECK(w2 == vocab.word(0));
  auto dev0 = space.deviation_row(0, 0);
  for (std::size_t i = 0; i < tc.dim; ++i) {
    double m, c;
    main_txt >> m;
    comp_txt >> c;
    CHECK(c == doctest::Approx(m + dev0[i]));
  }
}

TEST_CASE("cosine basics and zero-vector rejection") {
  std::vector<float> x{1.0f, 0.0f}, y{0.0f, 2.0f}, nx{-3.0f, 0.0f}, z{0.0f, 0.0f};
  CHECK(vectorspace::cosine(x, x) == doctest::Approx(1.0));
  CHECK(vectorspace::cosine(x, y) == doctest::Approx(0.0));
  CHECK(vectorspace::cosine(x, nx) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(vectorspace::cosine(x, z), DataError);
}

TEST_CASE("nearest neighbors rank, scope and break ties deterministically") {
  auto vocab = Vocabulary::from_words({"a", "b", "c", "d"}, {10, 8, 6, 4}, 1);
  TrainingConfig tc;
  tc.dim = 2;
  EmbeddingSpace space(vocab, testutil::two_members_plus_global(), tc);
  auto set = [&](std::span<float> row, float x, float y) {
    row[0] = x;
    row[1] = y;
  };
  for (std::uint32_t w = 0; w < 4; ++w) set(space.main_row(w), 0, 0);
  set(space.deviation_row(0, 0), 1, 0);   // a@alpha: the query
  set(space.deviation_row(0, 1), 1, 0);   // b@alpha: cos 1
  set(space.deviation_row(0, 2), 1, 1);   // c@alpha: cos 1/sqrt(2)
  set(space.deviation_row(0, 3), 2, 0);   // d@alpha: cos 1
  set(space.deviation_row(1, 0), 0, 1);   // a@beta: cos 0
  set(space.deviation_row(1, 1), 3, 0);   // b@beta: cos 1
  set(space.deviation_row(1, 3), -1, 0);  // d@beta: cos -1; c@beta stays zero

  auto nn = vectorspace::nearest_neighbors(space, "a", "alpha", 10);
  REQUIRE(nn.size() == 6);  // zero vectors (c@beta, all of global) are unrankable
  // three cosine-1 ties: word id first, then community order
  CHECK(nn[0].word == "b");
  CHECK(nn[0].community == "alpha");
  CHECK(nn[1].word == "b");
  CHECK(nn[1].community == "beta");
  CHECK(nn[2].word == "d");
  CHECK(nn[2].community == "alpha");
  CHECK(nn[3].word == "c");
  CHECK(nn[3].cosine == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(nn[4].word == "a");
  CHECK(nn[4].community == "beta");
  CHECK(nn[5].word == "d");
  CHECK(nn[5].cosine == doctest::Approx(-1.0));
  for (const auto& n : nn) CHECK((n.word != "a" || n.community != "alpha"));

  auto top2 = vectorspace::nearest_neighbors(space, "a", "alpha", 2);
  REQUIRE(top2.size() == 2);
  CHECK(top2[1].community == "beta");

  auto beta_only = vectorspace::nearest_neighbors(space, "a", "alpha", 10, {"beta"});
  REQUIRE(beta_only.size() == 3);
  for (const auto& n : beta_only) CHECK(n.community == "beta");

  CHECK_THROWS_AS(vectorspace::nearest_neighbors(space, "zz", "alpha", 3), DataError);
  CHECK_THROWS_AS(vectorspace::nearest_neighbors(space, "a", "zz", 3), DataError);
  CHECK_THROWS_AS(vectorspace::nearest_neighbors(space, "a", "alpha", 3, {"zz"}), DataError);
}
