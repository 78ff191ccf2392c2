#include <doctest.h>

#include <atomic>
#include <cmath>
#include <vector>

#include "neto/parallel.hpp"
#include "neto/rng.hpp"

using namespace neto;

TEST_SUITE("rng") {

TEST_CASE("same seed reproduces the stream, forks diverge") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng root(42);
  Rng f0 = root.fork(0);
  Rng f1 = root.fork(1);
  Rng f0_again = root.fork(0);
  int equal01 = 0;
  for (int i = 0; i < 64; ++i) {
    const auto x0 = f0.next_u64();
    const auto x1 = f1.next_u64();
    CHECK(x0 == f0_again.next_u64());
    equal01 += x0 == x1 ? 1 : 0;
  }
  CHECK(equal01 == 0);
  // Forking leaves the parent untouched.
  Rng fresh(42);
  CHECK(root.next_u64() == fresh.next_u64());
}

TEST_CASE("uniform and index ranges") {
  Rng rng(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = rng.uniform(-2.0, 3.0);
    CHECK(v >= -2.0);
    CHECK(v < 3.0);
    CHECK(rng.uniform_index(7) < 7);
  }
  // All residues of a small modulus get visited.
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 1000; ++i) seen[rng.uniform_index(7)]++;
  for (int c : seen) CHECK(c > 0);
}

TEST_CASE("normal moments") {
  Rng rng(123);
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("parallel_chunks covers the range exactly once") {
  const int n = 1003;
  std::vector<std::atomic<int>> marks(n);
  for (auto& m : marks) m.store(0);
  parallel_chunks(n, [&](int worker, int lo, int hi) {
    CHECK(worker >= 0);
    CHECK(worker < worker_count());
    CHECK(lo <= hi);
    for (int i = lo; i < hi; ++i) marks[i].fetch_add(1);
  });
  for (int i = 0; i < n; ++i) CHECK(marks[i].load() == 1);
}

TEST_CASE("thread cap forces the serial path") {
  const int before = worker_count();
  set_thread_cap(1);
  CHECK(worker_count() == 1);
  std::vector<int> order;
  parallel_chunks(100, [&](int worker, int lo, int hi) {
    CHECK(worker == 0);
    for (int i = lo; i < hi; ++i) order.push_back(i);
  });
  REQUIRE(order.size() == 100);
  for (int i = 0; i < 100; ++i) CHECK(order[i] == i);
  set_thread_cap(0);
  CHECK(worker_count() == before);

  // An empty range never invokes the callback; a single element stays on
  // the caller thread.
  int calls = 0;
  parallel_chunks(0, [&](int, int, int) { ++calls; });
  CHECK(calls == 0);
  parallel_chunks(1, [&](int worker, int lo, int hi) {
    ++calls;
    CHECK(worker == 0);
    CHECK(lo == 0);
    CHECK(hi == 1);
  });
  CHECK(calls == 1);
}

}  // TEST_SUITE
