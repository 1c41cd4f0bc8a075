#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace sdem {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// The output is a pure function of (counter, key).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key);
};

/// Splits a 64-bit seed into the Philox key.
Philox4x32::Key key_from_seed(std::uint64_t seed);

/// splitmix64 finalizer; used to derive independent keys for side streams.
std::uint64_t mix64(std::uint64_t x);

/// Two independent standard normals addressed by (key, counter).
std::pair<double, double> normal_pair(const Philox4x32::Key& key, const Philox4x32::Counter& ctr);

/// Two independent uniforms on the open interval (0, 1).
std::pair<double, double> uniform_pair(const Philox4x32::Key& key, const Philox4x32::Counter& ctr);

/// Uniform time grid on [0, T]. time(steps) == T exactly.
class TimeGrid {
 public:
  TimeGrid(double T, std::size_t steps);

  [[nodiscard]] double horizon() const { return T_; }
  [[nodiscard]] std::size_t steps() const { return steps_; }
  [[nodiscard]] double dt() const { return T_ / static_cast<double>(steps_); }
  [[nodiscard]] double time(std::size_t k) const;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double T_;
  std::size_t steps_;
};

/// Reproducible m-dimensional Brownian increments.
///
/// Increment (path, step) is computed on demand from (seed, path, step), so
/// any number of workers in any order see the same numbers, and runs that
/// share a batch are coupled through common random numbers.
class BrownianBatch {
 public:
  BrownianBatch(std::uint64_t seed, std::size_t paths, TimeGrid grid, std::size_t m);

  /// Writes dW for (path, step) into out[0..m).
  void increment(std::size_t path, std::size_t step, std::span<double> out) const;

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::size_t paths() const { return paths_; }
  [[nodiscard]] std::size_t dim() const { return m_; }
  [[nodiscard]] const TimeGrid& grid() const { return grid_; }

 private:
  std::uint64_t seed_;
  Philox4x32::Key key_;
  std::size_t paths_;
  TimeGrid grid_;
  std::size_t m_;
  double sqrt_dt_;
};

}  // namespace sdem
