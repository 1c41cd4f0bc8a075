#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sdem {

using Point = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised for contract violations on user-supplied data (bad parameters,
/// unavailable derivatives, degenerate matrices).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Monte Carlo estimate with standard error and the run fingerprint.
struct EstimatorReport {
  double estimate = 0.0;
  double se = 0.0;
  std::size_t paths = 0;     // samples that entered the mean
  std::size_t excluded = 0;  // flagged samples left out
  std::uint64_t config_hash = 0;

  [[nodiscard]] double excluded_fraction() const {
    const auto total = paths + excluded;
    return total == 0 ? 0.0 : static_cast<double>(excluded) / static_cast<double>(total);
  }
};

/// Mean and standard error of the finite entries of `values`, accumulated in
/// index order. Non-finite entries count as excluded.
EstimatorReport summarize(std::span<const double> values, std::uint64_t config_hash = 0);

/// sqrt(a.se^2 + b.se^2); the comparison scale for two independent-ish estimates.
double pooled_se(const EstimatorReport& a, const EstimatorReport& b);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

std::string hex64(std::uint64_t value);

}  // namespace sdem
