#include "sdem/rng.hpp"

#include "sdem/common.hpp"

#include <cmath>
#include <numbers>

namespace sdem {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

// 53 random bits mapped to the open interval (0, 1).
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter c, Key k) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

Philox4x32::Key key_from_seed(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::pair<double, double> uniform_pair(const Philox4x32::Key& key, const Philox4x32::Counter& ctr) {
  const auto r = Philox4x32::generate(ctr, key);
  return {to_unit(r[0], r[1]), to_unit(r[2], r[3])};
}

std::pair<double, double> normal_pair(const Philox4x32::Key& key, const Philox4x32::Counter& ctr) {
  const auto [u1, u2] = uniform_pair(key, ctr);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

TimeGrid::TimeGrid(double T, std::size_t steps) : T_(T), steps_(steps) {
  if (!(T > 0.0) || !std::isfinite(T)) throw Error("time grid: horizon must be positive and finite");
  if (steps == 0) throw Error("time grid: need at least one step");
}

double TimeGrid::time(std::size_t k) const {
  if (k == steps_) return T_;
  return T_ * static_cast<double>(k) / static_cast<double>(steps_);
}

BrownianBatch::BrownianBatch(std::uint64_t seed, std::size_t paths, TimeGrid grid, std::size_t m)
    : seed_(seed), key_(key_from_seed(seed)), paths_(paths), grid_(grid), m_(m),
      sqrt_dt_(std::sqrt(grid.dt())) {
  if (m == 0) throw Error("brownian batch: noise dimension must be positive");
}

void BrownianBatch::increment(std::size_t path, std::size_t step, std::span<double> out) const {
  const auto p = static_cast<std::uint64_t>(path);
  for (std::size_t j = 0; j < m_; j += 2) {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(step),
                                  static_cast<std::uint32_t>(j / 2),
                                  static_cast<std::uint32_t>(p),
                                  static_cast<std::uint32_t>(p >> 32)};
    const auto [z0, z1] = normal_pair(key_, ctr);
    out[j] = sqrt_dt_ * z0;
    if (j + 1 < m_) out[j + 1] = sqrt_dt_ * z1;
  }
}

}  // namespace sdem
