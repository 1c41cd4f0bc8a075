#include "sdem/quadrature.hpp"

#include "sdem/common.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sdem::quad {

Rule1d gauss_legendre(std::size_t n) {
  if (n == 0) throw Error("gauss_legendre: need at least one node");
  Rule1d rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    // Newton on P_n starting from the Chebyshev-like guess.
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

Rule1d composite_gauss_legendre(double a, double b, std::size_t n, std::size_t panels) {
  if (panels == 0) throw Error("composite_gauss_legendre: need at least one panel");
  const Rule1d base = gauss_legendre(n);
  const double width = (b - a) / static_cast<double>(panels);
  Rule1d rule;
  rule.nodes.reserve(n * panels);
  rule.weights.reserve(n * panels);
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + width * static_cast<double>(p);
    for (std::size_t i = 0; i < n; ++i) {
      rule.nodes.push_back(lo + 0.5 * width * (base.nodes[i] + 1.0));
      rule.weights.push_back(0.5 * width * base.weights[i]);
    }
  }
  return rule;
}

Rule1d midpoint(double a, double b, std::size_t cells) {
  if (cells == 0) throw Error("midpoint: need at least one cell");
  const double h = (b - a) / static_cast<double>(cells);
  Rule1d rule;
  rule.nodes.resize(cells);
  rule.weights.assign(cells, h);
  for (std::size_t i = 0; i < cells; ++i) rule.nodes[i] = a + h * (static_cast<double>(i) + 0.5);
  return rule;
}

double adaptive(const std::function<double(double)>& f, double a, double b, double tol) {
  if (a == b) return 0.0;
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  // Boost's tolerance is relative to the L1 norm; convert the absolute target.
  double l1 = 0.0;
  GK::integrate(f, a, b, 0, 0.0, nullptr, &l1);
  const double rel = l1 > tol ? tol / l1 : 1.0;
  double error = 0.0;
  double value = GK::integrate(f, a, b, 15, rel, &error);
  if (error <= tol) return value;

  // endpoint singularities: tanh-sinh
  thread_local boost::math::quadrature::tanh_sinh<double> ts;
  value = ts.integrate(f, a, b, std::min(rel, 1.5e-8), &error);
  if (!(error <= tol)) {
    throw Error("adaptive quadrature did not converge on [" + std::to_string(a) + ", " +
                std::to_string(b) + "], error estimate " + std::to_string(error));
  }
  return value;
}

}  // namespace sdem::quad
