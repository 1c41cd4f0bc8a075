#pragma once

#include "sdem/common.hpp"

#include <string>
#include <vector>

namespace sdem {

/// K_s(x, y) = s^{-n/2} exp(-|x - y|^2 / (2 s)). Unnormalized: there is no
/// (2 pi)^{-n/2} factor, so a Gaussian density equals (2 pi)^{-n/2} K_s.
double gaussian_kernel(double s, const Point& x, const Point& y);

struct DensityQuery {
  double t = 1.0;
  Point x;
  std::vector<Point> query_points;
  double bandwidth = 0.0;
};

struct DensityEstimate {
  std::vector<double> density;
  std::vector<double> se;  // jackknife standard error per query point
  bool degenerate = false; // all samples coincide
};

/// 1.06 * sigma * N^{-1/5}, sigma the geometric mean of the per-axis sample
/// standard deviations.
double silverman_bandwidth(const std::vector<Point>& samples);

/// Product-Gaussian kernel density estimate at the query points.
DensityEstimate density_estimate(const std::vector<Point>& samples, const DensityQuery& query,
                                 std::size_t workers = 1);

struct KernelBoundFit {
  double C1_min = 0.0;         // smallest grid value satisfying the bound (or the last tried)
  bool satisfied = false;
  double max_violation = 0.0;  // at C1_min; 0 when satisfied
};

/// True when density - se_margin * se <= C1 t^{-n/2} exp(-|x - y|^2 / (2 C1 t)) at
/// every query point; `violation` receives the largest excess.
bool kernel_bound_holds(const DensityEstimate& est, const DensityQuery& query, double C1,
                        double se_margin = 3.0, double* violation = nullptr);

/// Smallest C1 on a logarithmic grid over [c_lo, c_hi] for which the bound holds.
KernelBoundFit kernel_bound_fit(const DensityEstimate& est, const DensityQuery& query,
                                double c_lo = 1.0, double c_hi = 20.0, std::size_t grid = 200,
                                double se_margin = 3.0);

/// CSV with columns y0..y{n-1}, density, se, gaussian_bound_at_C1.
std::string density_csv(const DensityQuery& query, const DensityEstimate& est, double C1);

}  // namespace sdem
