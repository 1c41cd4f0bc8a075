#include "doctest.h"

#include "sdem/common.hpp"
#include "sdem/parallel.hpp"
#include "sdem/rng.hpp"

#include <cmath>
#include <vector>

using namespace sdem;

TEST_CASE("philox4x32-10 known answers") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::generate(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::generate(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("uniforms stay inside the open unit interval") {
  const auto key = key_from_seed(7);
  for (std::uint32_t i = 0; i < 10000; ++i) {
    const auto [a, b] = uniform_pair(key, {i, 0, 0, 0});
    CHECK(a > 0.0);
    CHECK(a < 1.0);
    CHECK(b > 0.0);
    CHECK(b < 1.0);
  }
}

TEST_CASE("time grid") {
  const TimeGrid g(0.3, 7);
  CHECK(g.time(0) == 0.0);
  CHECK(g.time(7) == 0.3);
  CHECK(g.dt() == doctest::Approx(0.3 / 7));
  CHECK_THROWS_AS(TimeGrid(0.0, 5), Error);
  CHECK_THROWS_AS(TimeGrid(1.0, 0), Error);
  CHECK_THROWS_AS(TimeGrid(-1.0, 5), Error);
}

TEST_CASE("brownian increments are a pure function of (seed, path, step)") {
  const BrownianBatch a(42, 100, TimeGrid(1.0, 50), 3);
  const BrownianBatch b(42, 100, TimeGrid(1.0, 50), 3);
  double x[3], y[3];
  // visit b in reverse order
  std::vector<double> forward, backward;
  for (std::size_t p = 0; p < 100; ++p) {
    for (std::size_t k = 0; k < 50; ++k) {
      a.increment(p, k, x);
      forward.insert(forward.end(), x, x + 3);
    }
  }
  for (std::size_t p = 100; p-- > 0;) {
    for (std::size_t k = 50; k-- > 0;) {
      b.increment(p, k, y);
      for (int j = 0; j < 3; ++j) backward.push_back(y[j]);
    }
  }
  for (std::size_t p = 0; p < 100; ++p) {
    for (std::size_t k = 0; k < 50; ++k) {
      for (std::size_t j = 0; j < 3; ++j) {
        const std::size_t fi = (p * 50 + k) * 3 + j;
        const std::size_t bi = ((99 - p) * 50 + (49 - k)) * 3 + j;
        REQUIRE(forward[fi] == backward[bi]);
      }
    }
  }

  const BrownianBatch other(43, 100, TimeGrid(1.0, 50), 3);
  other.increment(0, 0, y);
  a.increment(0, 0, x);
  CHECK(x[0] != y[0]);
}

TEST_CASE("brownian increments are unaffected by the worker count") {
  const BrownianBatch noise(9, 4000, TimeGrid(1.0, 10), 2);
  auto collect = [&](std::size_t workers) {
    std::vector<double> out(4000 * 2);
    parallel_for(4000, workers, [&](std::size_t i) {
      double dw[2];
      noise.increment(i, 3, dw);
      out[2 * i] = dw[0];
      out[2 * i + 1] = dw[1];
    });
    return out;
  };
  CHECK(collect(1) == collect(4));
}

TEST_CASE("brownian increments have mean 0 and variance dt") {
  const std::size_t paths = 2000, steps = 200;
  for (std::size_t m : {1, 2, 3}) {
    const BrownianBatch noise(2024, paths, TimeGrid(0.5, steps), m);
    const double dt = noise.grid().dt();
    std::vector<double> dw(m);
    for (std::size_t j = 0; j < m; ++j) {
      double sum = 0.0, sq = 0.0;
      for (std::size_t p = 0; p < paths; ++p) {
        for (std::size_t k = 0; k < steps; ++k) {
          noise.increment(p, k, dw);
          sum += dw[j] / std::sqrt(dt);
          sq += dw[j] * dw[j];
        }
      }
      const double N = static_cast<double>(paths * steps);
      CHECK(std::abs(sum / N) <= 4.0 / std::sqrt(N));
      CHECK(sq / N == doctest::Approx(dt).epsilon(0.01));
    }
  }
}

TEST_CASE("coordinates of one increment are uncorrelated") {
  const BrownianBatch noise(5, 20000, TimeGrid(1.0, 10), 3);
  double dw[3];
  double c01 = 0.0, c02 = 0.0, c12 = 0.0;
  const double N = 20000.0 * 10.0;
  for (std::size_t p = 0; p < 20000; ++p) {
    for (std::size_t k = 0; k < 10; ++k) {
      noise.increment(p, k, dw);
      c01 += dw[0] * dw[1]  * 10.0;
      c02 += dw[0] * dw[2]  * 10.0;
      c12 += dw[1] * dw[2]  * 10.0;
    }
  }
  CHECK(std::abs(c01 / N) < 4.0 / std::sqrt(N));
  CHECK(std::abs(c02 / N) < 4.0 / std::sqrt(N));
  CHECK(std::abs(c12 / N) < 4.0 / std::sqrt(N));
}

TEST_CASE("parallel_for visits each index once and rethrows") {
  std::vector<int> hits(1000, 0);
  parallel_for(1000, 3, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(100, 2,
                               [](std::size_t i) {
                                 if (i == 57) throw Error("boom");
                               }),
                  Error);
}
