#include <doctest.h>

#include <cmath>

#include "dft/prng.hpp"

using dft::Prng;

TEST_CASE("identical seed and stream reproduce the draw sequence") {
  Prng a(123, 7), b(123, 7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Prng c(123, 7), d(123, 7);
  for (int i = 0; i < 100; ++i) CHECK(c.normal() == d.normal());
}

TEST_CASE("different streams decorrelate") {
  Prng a(123, 1), b(123, 2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += (a.next_u64() == b.next_u64());
  CHECK(same == 0);
}

TEST_CASE("uniform stays in [0,1)") {
  Prng g(5, 0);
  for (int i = 0; i < 10000; ++i) {
    double u = g.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal moments") {
  Prng g(9, 3);
  int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    double x = g.normal();
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  CHECK(std::abs(s1 / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
  CHECK(std::abs(s4 / n - 3.0) < 0.1);
}

TEST_CASE("uniform_u64 covers the range without bias artifacts") {
  Prng g(17, 0);
  int counts[5] = {0, 0, 0, 0, 0};
  for (int i = 0; i < 50000; ++i) counts[g.uniform_u64(5)] += 1;
  for (int k = 0; k < 5; ++k) CHECK(std::abs(counts[k] - 10000) < 500);
}

TEST_CASE("matrix fill is row-major") {
  Prng a(42, 1), b(42, 1);
  dft::Mat m = a.normal_mat(2, 3);
  CHECK(m(0, 0) == b.normal());
  CHECK(m(0, 1) == b.normal());
  CHECK(m(0, 2) == b.normal());
  CHECK(m(1, 0) == b.normal());
}

TEST_CASE("child streams are reproducible and distinct") {
  Prng g(8, 4);
  Prng c1 = g.child(0), c2 = g.child(1), c1again = g.child(0);
  CHECK(c1.next_u64() == c1again.next_u64());
  Prng c1b = g.child(0);
  CHECK(c1b.next_u64() != c2.next_u64());
}
