#include "sdem/common.hpp"

#include <cmath>
#include <cstdio>

namespace sdem {

EstimatorReport summarize(std::span<const double> values, std::uint64_t config_hash) {
  EstimatorReport r;
  r.config_hash = config_hash;
  // Welford, in index order.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t k = 0;
  for (double v : values) {
    if (!std::isfinite(v)) {
      ++r.excluded;
      continue;
    }
    ++k;
    const double delta = v - mean;
    mean += delta / static_cast<double>(k);
    m2 += delta * (v - mean);
  }
  r.paths = k;
  r.estimate = k > 0 ? mean : std::nan("");
  r.se = k > 1 ? std::sqrt(m2 / static_cast<double>(k - 1) / static_cast<double>(k)) : 0.0;
  return r;
}

double pooled_se(const EstimatorReport& a, const EstimatorReport& b) {
  return std::sqrt(a.se * a.se + b.se * b.se);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace sdem
