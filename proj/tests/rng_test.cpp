#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "commshift/rng.hpp"

using namespace commshift;

TEST_CASE("fnv1a distinguishes strings and is stable") {
  CHECK(fnv1a("alpha") == fnv1a("alpha"));
  CHECK(fnv1a("alpha") != fnv1a("beta"));
  CHECK(fnv1a("") != fnv1a("a"));
}

TEST_CASE("derive_seed separates tags and extras") {
  std::set<std::uint64_t> seen;
  for (auto tag : {"init", "epoch", "neg", "split"})
    for (std::uint64_t extra : {0ull, 1ull, 2ull, 42ull})
      seen.insert(derive_seed(7, tag, extra));
  CHECK(seen.size() == 16);
  CHECK(derive_seed(7, "init", 0) == derive_seed(7, "init", 0));
  CHECK(derive_seed(7, "init", 0) != derive_seed(8, "init", 0));
}

TEST_CASE("rng determinism and divergence by seed") {
  Rng a(123), b(123), c(124);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    auto x = a.next(), y = b.next(), z = c.next();
    all_equal = all_equal && x == y;
    any_diff = any_diff || x != z;
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("below stays in range and covers small domains") {
  Rng r(99);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    auto v = r.below(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("uniform lies in [0,1) and respects bounds") {
  Rng r(5);
  for (int i = 0; i < 1000; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    double v = r.uniform(-2.0, 3.0);
    CHECK(v >= -2.0);
    CHECK(v < 3.0);
  }
}

TEST_CASE("shuffle preserves the multiset and varies by seed") {
  std::vector<int> base(50);
  for (int i = 0; i < 50; ++i) base[i] = i;
  auto a = base, b = base;
  Rng(1).shuffle(a);
  Rng(2).shuffle(b);
  auto sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  CHECK(sa == base);
  CHECK(sb == base);
  CHECK(a != b);
  auto a2 = base;
  Rng(1).shuffle(a2);
  CHECK(a == a2);
}

TEST_CASE("normal and geometric have roughly the right moments") {
  Rng r(42);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    sum += x;
    sq += x * x;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);

  double gsum = 0;
  for (int i = 0; i < n; ++i) gsum += static_cast<double>(r.geometric(0.25));
  CHECK(std::abs(gsum / n - 4.0) < 0.15);
}
