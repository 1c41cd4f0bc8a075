#include "sdem/kernel.hpp"

#include "sdem/parallel.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace sdem {

double gaussian_kernel(double s, const Point& x, const Point& y) {
  if (!(s > 0.0)) throw Error("gaussian_kernel: s must be positive");
  const double n = static_cast<double>(x.size());
  return std::pow(s, -0.5 * n) * std::exp(-(x - y).squaredNorm() / (2.0 * s));
}

double silverman_bandwidth(const std::vector<Point>& samples) {
  if (samples.size() < 2) throw Error("silverman_bandwidth: need at least two samples");
  const auto n = samples.front().size();
  Point mean = Point::Zero(n);
  for (const auto& s : samples) mean += s;
  mean /= static_cast<double>(samples.size());
  Point var = Point::Zero(n);
  for (const auto& s : samples) var += (s - mean).cwiseAbs2();
  var /= static_cast<double>(samples.size() - 1);
  const double sigma = std::exp(var.array().sqrt().log().mean());
  return 1.06 * sigma * std::pow(static_cast<double>(samples.size()), -0.2);
}

DensityEstimate density_estimate(const std::vector<Point>& samples, const DensityQuery& query,
                                 std::size_t workers) {
  if (!(query.bandwidth > 0.0) || !std::isfinite(query.bandwidth)) {
    throw Error("density_estimate: degenerate bandwidth");
  }
  if (samples.size() < 10000) throw Error("density_estimate: need at least 1e4 samples");
  for (const auto& y : query.query_points) {
    if (!y.allFinite()) throw Error("density_estimate: query points must be finite");
  }

  const double h = query.bandwidth;
  const double dim = static_cast<double>(samples.front().size());
  const double norm = std::pow(2.0 * std::numbers::pi * h * h, -0.5 * dim);
  const double inv2h2 = 1.0 / (2.0 * h * h);
  const double N = static_cast<double>(samples.size());

  DensityEstimate out;
  out.density.resize(query.query_points.size());
  out.se.resize(query.query_points.size());
  parallel_for(query.query_points.size(), workers, [&](std::size_t q) {
    const Point& y = query.query_points[q];
    // Welford accumulation
    double mean = 0.0;
    double m2 = 0.0;
    double count = 0.0;
    for (const auto& s : samples) {
      const double k = norm * std::exp(-(y - s).squaredNorm() * inv2h2);
      count += 1.0;
      const double delta = k - mean;
      mean += delta / count;
      m2 += delta * (k - mean);
    }
    // Delete-one jackknife of a sample mean reduces to the usual s / sqrt(N).
    const double var = m2 / (N - 1.0);
    out.density[q] = mean;
    out.se[q] = std::sqrt(var / N);
  });

  out.degenerate = true;
  for (const auto& s : samples) {
    if (s != samples.front()) {
      out.degenerate = false;
      break;
    }
  }
  return out;
}

namespace {

// C1 t^{-n/2} exp(-|x - y|^2 / (2 C1 t))
double gaussian_bound(double C1, double t, const Point& x, const Point& y) {
  const double n = static_cast<double>(x.size());
  return C1 * std::pow(t, -0.5 * n) * std::exp(-(y - x).squaredNorm() / (2.0 * C1 * t));
}

}  // namespace

bool kernel_bound_holds(const DensityEstimate& est, const DensityQuery& query, double C1,
                        double se_margin, double* violation) {
  if (est.density.size() != query.query_points.size()) {
    throw Error("kernel_bound: estimate and query sizes differ");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < est.density.size(); ++i) {
    const double lower = est.density[i] - se_margin * est.se[i];
    const double bound = gaussian_bound(C1, query.t, query.x, query.query_points[i]);
    worst = std::max(worst, lower - bound);
  }
  if (violation) *violation = worst;
  return worst <= 0.0;
}

KernelBoundFit kernel_bound_fit(const DensityEstimate& est, const DensityQuery& query, double c_lo,
                                double c_hi, std::size_t grid, double se_margin) {
  if (grid < 2 || !(c_lo > 0.0) || !(c_hi > c_lo)) throw Error("kernel_bound_fit: bad C1 grid");
  KernelBoundFit fit;
  const double ratio = std::log(c_hi / c_lo) / static_cast<double>(grid - 1);
  for (std::size_t i = 0; i < grid; ++i) {
    const double c = i + 1 == grid ? c_hi : c_lo * std::exp(ratio * static_cast<double>(i));
    double violation = 0.0;
    fit.C1_min = c;
    if (kernel_bound_holds(est, query, c, se_margin, &violation)) {
      fit.satisfied = true;
      fit.max_violation = 0.0;
      return fit;
    }
    fit.max_violation = violation;
  }
  return fit;
}

std::string density_csv(const DensityQuery& query, const DensityEstimate& est, double C1) {
  std::ostringstream os;
  os.precision(17);
  const auto n = query.x.size();
  for (Eigen::Index d = 0; d < n; ++d) os << 'y' << d << ',';
  os << "density,se,gaussian_bound_at_C1\n";
  for (std::size_t i = 0; i < query.query_points.size(); ++i) {
    const Point& y = query.query_points[i];
    for (Eigen::Index d = 0; d < n; ++d) os << y[d] << ',';
    os << est.density[i] << ',' << est.se[i] << ',' << gaussian_bound(C1, query.t, query.x, y) << '\n';
  }
  return os.str();
}

}  // namespace sdem
