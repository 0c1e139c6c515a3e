#include <set>

#include "doctest.h"
#include "traylab/format.hpp"
#include "traylab/rng.hpp"

using namespace traylab;

TEST_CASE("rng streams are reproducible") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42), d(43);
  CHECK(c.next_u64() != d.next_u64());
}

TEST_CASE("uniform stays in [0, 1) and below(n) in [0, n)") {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.below(7) < 7u);
  }
}

TEST_CASE("below covers every value") {
  Rng r(5);
  std::set<std::size_t> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(r.below(5));
  CHECK(seen.size() == 5);
}

TEST_CASE("normal samples have roughly zero mean and unit variance") {
  Rng r(9);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(0.01).scale(1.0));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("derive_seed separates streams") {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 1000; ++i) seeds.insert(derive_seed(7, i));
  CHECK(seeds.size() == 1000);
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
  CHECK(derive_seed(7, 3) != derive_seed(8, 3));
}

TEST_CASE("format_fixed follows printf rounding and sign") {
  CHECK(format_fixed(-0.04, 1) == "-0.0");
  CHECK(format_fixed(1.25, 1) == "1.2");
  CHECK(format_fixed(2.0, 3) == "2.000");
  CHECK(format_fixed(1e300, 1).size() > 300);
}

TEST_CASE("format_number is the shortest exact text") {
  CHECK(format_number(20.0) == "20.0");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(0.18) == "0.18");
  CHECK(format_number(-3.5) == "-3.5");
}

TEST_CASE("format_trimmed keeps at least one decimal") {
  CHECK(format_trimmed(1.90, 2) == "1.9");
  CHECK(format_trimmed(2.0, 2) == "2.0");
  CHECK(format_trimmed(3.156, 2) == "3.16");
  CHECK(format_trimmed(0.24, 2) == "0.24");
}
