#pragma once

#include "sdem/fields.hpp"
#include "sdem/mollify.hpp"
#include "sdem/rng.hpp"

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sdem {

/// One simulated trajectory of the state xi and the derivative flow V.
///
/// Running summaries (sup_k |V_k|_F and the left-point integral of G along
/// xi) are always kept; the full trajectory only when requested.
struct FlowPath {
  std::size_t path_index = 0;
  const BrownianBatch* noise = nullptr;  // increments used, by reference
  Point x0;
  Point xi_T;
  Matrix V_T;
  double sup_v_norm = 1.0;  // max over grid times of |V_k|_F
  double int_g = 0.0;       // sum_k G(xi_k) dt
  bool flagged = false;     // non-finite state encountered
  std::string flag_reason;

  // Present when retained: column k holds xi_k, resp. V_k flattened column-major.
  Matrix xi;
  Matrix V;

  [[nodiscard]] bool retained() const { return xi.cols() > 0; }
  [[nodiscard]] std::size_t steps() const;
  [[nodiscard]] Eigen::Map<const Matrix> derivative_at(std::size_t k) const;
};

/// Callback invoked once per step k = 0 .. steps-1 with the left-point state:
/// xi_k, V_k, the coefficients A(xi_k) (n x (m+1)), DA(xi_k) and dW_k.
/// Returning false aborts the path (it is then flagged).
using StepVisitor = std::function<bool(std::size_t k, const Point& xi, const Matrix& V, const Matrix& a,
                                       const Matrix& da, const Eigen::VectorXd& dw)>;

/// Euler-Maruyama for the coupled system
///   xi_{k+1} = xi_k + sum_l A_l(xi_k) dW^l_k + A_0(xi_k) dt
///   V_{k+1}  = V_k + sum_l DA_l(xi_k) V_k dW^l_k + DA_0(xi_k) V_k dt
/// with V_0 = I, driven by path `path_index` of `noise`.
FlowPath integrate(const VectorFieldSet& fs, const Point& x0, const BrownianBatch& noise,
                   std::size_t path_index, bool retain = true, const StepVisitor& visitor = {});

struct EnsembleOptions {
  std::size_t workers = 1;
  bool retain = false;
};

struct Ensemble {
  std::vector<FlowPath> paths;  // indexed by path
  std::size_t flagged = 0;

  [[nodiscard]] double flagged_fraction() const;
};

/// All paths of `noise` started at x0, integrated in parallel.
Ensemble simulate(const VectorFieldSet& fs, const Point& x0, const BrownianBatch& noise,
                  const EnsembleOptions& options = {});

struct SupDistance {
  double xi = 0.0;  // (max_k |xi^a_k - xi^b_k|)^p
  double V = 0.0;   // (max_k |V^a_k - V^b_k|_F)^p
};

/// Pathwise sup distances between two retained paths on the same grid.
SupDistance sup_distance(const FlowPath& a, const FlowPath& b, double p);

/// eps -> ensemble, every level driven by the same increments. Key 0.0 holds
/// the unmollified run when `include_unmollified` is set. Paths are retained.
std::map<double, Ensemble> coupled_family(const VectorFieldSet& fs, const std::vector<double>& eps_list,
                                          const Point& x0, const BrownianBatch& noise,
                                          const QuadratureSpec& quad = {},
                                          bool include_unmollified = false,
                                          const EnsembleOptions& options = {});

struct LadderRow {
  double eps = 0.0;
  double reference_eps = 0.0;
  EstimatorReport xi;  // E sup |xi^eps - xi^ref|^p
  EstimatorReport V;   // E sup |V^eps - V^ref|_F^p
};

struct LadderResult {
  std::vector<LadderRow> rows;
  std::size_t flagged = 0;  // paths flagged at any level
  std::size_t paths = 0;
};

/// Streaming form of coupled_family + sup_distance: for every eps in the
/// ladder except the reference (the smallest), E sup|xi^eps - xi^ref|^p and
/// E sup|V^eps - V^ref|^p. Only one path per level is held in memory at a time.
LadderResult coupled_sup_moments(const VectorFieldSet& fs, const std::vector<double>& eps_list,
                                 const Point& x0, const BrownianBatch& noise, double p,
                                 const QuadratureSpec& quad = {}, const EnsembleOptions& options = {});

/// E sup_{s <= T} |V_s|_F^p.
EstimatorReport moment_sup(std::span<const FlowPath> ensemble, double p);

struct ExpGReport {
  EstimatorReport report;
  std::size_t overflowed = 0;
};

/// E exp(6 q^2 int_0^T G(xi_s) ds); +inf with the overflow count when any
/// path overflows.
ExpGReport exp_g_functional(std::span<const FlowPath> ensemble, double q);

struct DerivativeCheck {
  Point fd;    // ensemble mean of (xi_T(x0 + h v0) - xi_T(x0 - h v0)) / 2h
  Point vt;    // ensemble mean of V_T(x0) v0
  double gap;  // ensemble mean of |fd_i - vt_i|
  std::size_t excluded = 0;
};

/// Compares V_T v0 with a central difference of the flow under common noise.
DerivativeCheck spatial_derivative_check(const VectorFieldSet& fs, const Point& x0, const Point& v0,
                                         double h, const BrownianBatch& noise,
                                         const EnsembleOptions& options = {});

}  // namespace sdem
