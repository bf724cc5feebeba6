#include <doctest.h>

#include <algorithm>
#include <map>

#include "parg/common.hpp"
#include "parg/log.hpp"

using namespace parg;

TEST_CASE("join") {
  CHECK(join({}) == "");
  CHECK(join({"a"}) == "a");
  CHECK(join({"a", "b", "c"}) == "a b c");
  CHECK(join({"a", "b"}, ", ") == "a, b");
}

TEST_CASE("derive_seed matches splitmix64") {
  // Reference values from a Python transcription of the finalizer.
  CHECK(derive_seed(0, 0) == 16294208416658607535ULL);
  CHECK(derive_seed(42, 0) == 13679457532755275413ULL);
  CHECK(derive_seed(1, 3) == 8196980753821780235ULL);
  CHECK(derive_seed(42, 1) != derive_seed(42, 0));
}

TEST_CASE("rng is the 64-bit mersenne twister") {
  Rng rng(5489);
  CHECK(rng.next() == 14514284786278117030ULL);
}

TEST_CASE("rng uniform01 range and below bounds") {
  Rng rng(1);
  std::map<std::uint64_t, int> counts;
  for (int i = 0; i < 6000; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    ++counts[rng.below(6)];
  }
  CHECK(counts.size() == 6);
  for (const auto& [k, n] : counts) {
    CHECK(k < 6);
    CHECK(n > 850);
    CHECK(n < 1150);
  }
  CHECK_THROWS_AS(rng.below(0), ValidationError);
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> a(50), b;
  for (int i = 0; i < 50; ++i) a[static_cast<std::size_t>(i)] = i;
  b = a;
  Rng r1(9), r2(9);
  r1.shuffle(a);
  r2.shuffle(b);
  CHECK(a == b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("log level parsing") {
  CHECK_NOTHROW(set_log_level("debug"));
  CHECK_NOTHROW(set_log_level("off"));
  CHECK_THROWS_AS(set_log_level("loud"), ValidationError);
  set_log_level("warn");
}
