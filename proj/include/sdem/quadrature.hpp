#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace sdem::quad {

struct Rule1d {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1].
Rule1d gauss_legendre(std::size_t n);

/// Composite rule on [a, b]: `panels` equal panels, each with the n-point
/// Gauss-Legendre rule.
Rule1d composite_gauss_legendre(double a, double b, std::size_t n, std::size_t panels);

/// Midpoint rule with `cells` equal cells on [a, b].
Rule1d midpoint(double a, double b, std::size_t cells);

/// Adaptive Gauss-Kronrod (15-point) on [a, b] to absolute tolerance `tol`,
/// with a tanh-sinh retry for endpoint singularities.
/// Throws sdem::Error when the error estimate stays above tolerance.
double adaptive(const std::function<double(double)>& f, double a, double b, double tol = 1e-10);

}  // namespace sdem::quad
