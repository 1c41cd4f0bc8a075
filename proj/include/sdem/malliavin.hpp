#pragma once

#include "sdem/flow.hpp"

#include <cstdint>
#include <functional>

namespace sdem {

/// Y(x) = A(x)^T (A(x) A(x)^T)^{-1}, the minimum-norm right inverse of the
/// n x m diffusion matrix. |A Y - I|_F <= 1e-10 is enforced; on a violation
/// the solve is repeated in extended precision before giving up.
Matrix right_inverse(const VectorFieldSet& fs, const Point& x);
Matrix right_inverse(const Matrix& A);

/// Shared Monte Carlo settings for the gradient and IBP estimators.
struct MonteCarloConfig {
  double t = 0.5;
  std::size_t steps = 500;
  std::size_t paths = 100000;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::uint64_t config_hash = 0;
};

/// (1/t) E[ f(xi_t) sum_k <Y(xi_k) V_k v0, dW_k> ].
EstimatorReport bismut_gradient(const VectorFieldSet& fs, const ScalarFn& f, const Point& x,
                                const Point& v0, const MonteCarloConfig& cfg);

using GradientFn = std::function<Point(const Point&)>;

/// E[ df(xi_t) . (V_t v0) ].
EstimatorReport intertwine_gradient(const VectorFieldSet& fs, const GradientFn& df, const Point& x,
                                    const Point& v0, const MonteCarloConfig& cfg);

/// Central difference of the Monte Carlo semigroup, both starts driven by
/// the same increments.
EstimatorReport fd_gradient(const VectorFieldSet& fs, const ScalarFn& f, const Point& x, const Point& v0,
                            double h, const MonteCarloConfig& cfg);

/// Read-only view of one path's increments strictly before step k; the only
/// input an adapted Cameron-Martin rate may depend on.
class AdaptedHistory {
 public:
  AdaptedHistory(const BrownianBatch& noise, std::size_t path, std::size_t step)
      : noise_(&noise), path_(path), step_(step) {}

  [[nodiscard]] std::size_t step() const { return step_; }
  [[nodiscard]] double time() const { return noise_->grid().time(step_); }
  /// dW_j for j < step(); throws std::out_of_range otherwise.
  [[nodiscard]] Eigen::VectorXd increment(std::size_t j) const;

 private:
  const BrownianBatch* noise_;
  std::size_t path_;
  std::size_t step_;
};

/// h with h_0 = 0 given through its time derivative: h_{k} = sum_{j<k} hdot_j dt.
class CameronMartinPath {
 public:
  using Rate = std::function<void(const AdaptedHistory&, Eigen::Ref<Point> hdot)>;

  CameronMartinPath(std::size_t n, Rate rate);
  static CameronMartinPath constant(Point direction);

  [[nodiscard]] std::size_t dim() const { return n_; }
  void rate(const AdaptedHistory& history, Eigen::Ref<Point> hdot) const;

 private:
  std::size_t n_;
  Rate rate_;
};

/// delta V^h_T = sum_k <Y(xi_k) V_k hdot_k, dW_k>, with V^{hdot}_s read as the
/// matrix-vector product V_s hdot_s. `path` must be retained.
double divergence(const CameronMartinPath& h, const FlowPath& path, const VectorFieldSet& fs);

/// F on the discrete path.
using PathFunctional = std::function<double(const FlowPath&)>;
/// dF at the path applied to the tangent trajectory (column k = V_k h_k).
using PathDerivative = std::function<double(const FlowPath&, const Matrix& tangent)>;

struct IbpResult {
  EstimatorReport lhs;  // E dF(V^h)
  EstimatorReport rhs;  // E F delta V^h
  double gap = 0.0;
  double se = 0.0;      // pooled
};

IbpResult ibp_check(const VectorFieldSet& fs, const PathFunctional& F, const PathDerivative& dF,
                    const CameronMartinPath& h, const Point& x, const MonteCarloConfig& cfg);

}  // namespace sdem
