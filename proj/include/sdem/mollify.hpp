#pragma once

#include "sdem/fields.hpp"

#include "json.hpp"

#include <memory>
#include <vector>

namespace sdem {

/// Tensor-product rule over [-eps, eps]^n used for convolutions.
struct QuadratureSpec {
  enum class Rule { gauss_legendre, midpoint };

  Rule rule = Rule::gauss_legendre;
  std::size_t nodes = 16;  // per axis and panel (Gauss) or cells per axis (midpoint)
  std::size_t panels = 0;  // Gauss panels per axis; 0 picks 4, 2, 1 panels for n = 1, 2, 3

  static QuadratureSpec midpoint_check() { return {Rule::midpoint, 32, 1}; }
};

nlohmann::json quad_to_json(const QuadratureSpec& q);
QuadratureSpec quad_from_json(const nlohmann::json& doc);

/// Normalizing constant C_n of the standard mollifier in dimension n (cached).
double mollifier_constant(std::size_t n);

/// eta(x) = C_n exp(1 / (|x|^2 - 1)) for |x| < 1, else 0.
double eta(const Point& x);
Point eta_gradient(const Point& x);

/// eta_eps(x) = eps^{-n} eta(x / eps).
double eta_eps(const Point& x, double eps);

enum class DerivativeRoute {
  automatic,        // weak derivative when the base supplies one, else kernel gradient
  weak_derivative,  // DA_eps = eta_eps * DA
  kernel_gradient,  // DA_eps = (D eta_eps) * A
};

/// eps-smoothed view of a coefficient family:
///   A_l^eps(x) = int_{B_eps} eta_eps(y) A_l(x - y) dy
/// evaluated by a fixed tensor-product rule. The discrete weights are
/// normalized to unit mass, so constants and odd-symmetric linear parts are
/// reproduced exactly.
class MollifiedFieldSet {
 public:
  MollifiedFieldSet(VectorFieldSet base, double eps, QuadratureSpec quad = {},
                    DerivativeRoute route = DerivativeRoute::automatic);

  [[nodiscard]] const VectorFieldSet& base() const;
  [[nodiscard]] double eps() const;
  [[nodiscard]] const QuadratureSpec& quad() const;
  [[nodiscard]] DerivativeRoute route() const;
  [[nodiscard]] std::size_t node_count() const;

  void coefficients(const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> out) const;
  void derivatives(const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> out) const;

  /// Same evaluators packaged as a VectorFieldSet (shares the node tables).
  [[nodiscard]] VectorFieldSet as_field() const;

  /// Compares A^eps under this rule and under a rule with doubled resolution
  /// at `points`; throws sdem::Error when they differ by more than `tol`.
  void refinement_check(const std::vector<Point>& points, double tol) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

MollifiedFieldSet mollify_field(const VectorFieldSet& fs, double eps, const QuadratureSpec& quad = {},
                                DerivativeRoute route = DerivativeRoute::automatic);

/// eta_eps * f for a scalar function on R^n.
ScalarFn mollify_scalar(ScalarFn f, std::size_t n, double eps, const QuadratureSpec& quad = {});

/// max over grid of |f_eps(x) - f(x)|.
double sup_error(const ScalarFn& f, const ScalarFn& f_eps, const std::vector<Point>& grid);

}  // namespace sdem
