#pragma once

#include "sdem/common.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sdem {

/// Nondecreasing growth bounds psi1, psi2 for unbounded coefficient families.
struct GrowthProfile {
  std::function<double(double)> psi1;
  std::function<double(double)> psi2;
  std::string psi1_desc;
  std::string psi2_desc;
  bool linear = false;  // psi2(s) <= linear_c2 * (1 + s) is claimed
  double linear_c2 = 0.0;
};

/// Checks the GrowthProfile invariants on the sampled arguments: both psi
/// functions nondecreasing, and the linear bound when `linear` is set.
bool growth_profile_consistent(const GrowthProfile& profile, const std::vector<double>& args);

enum class Growth { bounded, linear, custom };

struct FieldMeta {
  double theta = 0.0;  // ellipticity lower bound
  double hoelder_K = 0.0;
  double hoelder_alpha = 1.0;
  double bound_M = std::numeric_limits<double>::infinity();
  Growth growth = Growth::bounded;
  std::optional<GrowthProfile> profile;  // set iff growth == custom
};

/// Coefficient family (A_0, ..., A_m) on R^n together with an optional chosen
/// version of the weak derivatives DA_l.
///
/// Layout: coefficients are an n x (m+1) matrix with column 0 the drift A_0
/// and column l the diffusion field A_l. Derivatives are an n x n(m+1)
/// matrix; block l (columns l*n .. l*n+n-1) holds DA_l. Evaluators are pure
/// and may be called concurrently.
class VectorFieldSet {
 public:
  using CoeffFn = std::function<void(const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> a)>;
  using JacobianFn = std::function<void(const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> da)>;

  VectorFieldSet(std::size_t n, std::size_t m, CoeffFn coeffs, JacobianFn jacobians,
                 FieldMeta meta = {}, std::string name = "custom", std::vector<double> params = {});

  [[nodiscard]] std::size_t n() const { return n_; }
  [[nodiscard]] std::size_t m() const { return m_; }
  [[nodiscard]] bool has_derivative() const { return static_cast<bool>(jacobians_); }
  [[nodiscard]] const FieldMeta& meta() const { return meta_; }
  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] const std::vector<double>& params() const { return params_; }

  void coefficients(const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> out) const;
  /// Throws sdem::Error("weak derivative unavailable") when DA was not supplied.
  void derivatives(const Eigen::Ref<const Point>& x, Eigen::Ref<Matrix> out) const;

  [[nodiscard]] Matrix coefficients(const Point& x) const;
  [[nodiscard]] Matrix derivatives(const Point& x) const;
  /// The n x m diffusion matrix A(x) = (A_1, ..., A_m).
  [[nodiscard]] Matrix diffusion(const Point& x) const;
  [[nodiscard]] Point component(std::size_t l, const Point& x) const;
  [[nodiscard]] Matrix derivative(std::size_t l, const Point& x) const;

  [[nodiscard]] const CoeffFn& coeff_fn() const { return coeffs_; }
  [[nodiscard]] const JacobianFn& jacobian_fn() const { return jacobians_; }

  VectorFieldSet with_meta(FieldMeta meta) const;

 private:
  std::size_t n_;
  std::size_t m_;
  CoeffFn coeffs_;
  JacobianFn jacobians_;
  FieldMeta meta_;
  std::string name_;
  std::vector<double> params_;
};

using ScalarFn = std::function<double(const Point&)>;

/// Wraps a scalar function on R as the drift of a 1-d family with m = 1 and
/// A_1 == 0. `df` (optional) becomes DA_0.
VectorFieldSet scalar_drift_field(std::function<double(double)> f,
                                  std::function<double(double)> df = {});

/// Built-in families:
///   bm          params [n]                       A_l = e_l, A_0 = 0
///   ou          params [lambda]                  n = m = 1, A_1 = 1, A_0 = -lambda x
///   log_example params [beta]                    n = m = 1, A_0 = 0,
///               A_1(x) = 1 + int_0^x sqrt(beta |log|y||) 1_{|y|<=1} dy
///   const_shift params [n, A (n*n, row-major), b (n)]   A_l = column l of A, A_0 = b
VectorFieldSet builtin_field(const std::string& name, const std::vector<double>& params);

/// Programmatic registry for custom families referenced by name from JSON.
using FieldFactory = std::function<VectorFieldSet(const std::vector<double>&)>;
void register_field(const std::string& name, FieldFactory factory);

/// Field spec JSON: { name, params, n, m, meta }.
nlohmann::json field_to_json(const VectorFieldSet& fs);
VectorFieldSet field_from_json(const nlohmann::json& doc);

/// min over samples of the smallest eigenvalue of a(x) = A(x) A(x)^T.
double ellipticity_margin(const VectorFieldSet& fs, const std::vector<Point>& samples);

/// max over pairs and l of |A_l(x) - A_l(y)| / |x - y|^alpha.
double hoelder_estimate(const VectorFieldSet& fs, double alpha,
                        const std::vector<std::pair<Point, Point>>& pairs);

/// G(x) = sum_{l=0}^m |DA_l(x)|_F^2.
double g_function(const VectorFieldSet& fs, const Point& x);

struct ConditionGOptions {
  double ratio = 2.0;         // divergence threshold on growth across the ladder
  std::size_t doublings = 6;  // ladder length: samples, 2*samples, ..., 2^doublings*samples
  std::size_t blocks = 16;    // independent blocks for the robust growth statistic
};

struct ConditionGResult {
  double estimate = 0.0;     // pooled estimate at the largest sample count
  bool diverging = false;
  double growth = 1.0;       // median-of-block-means growth across the ladder
  double last_change = 0.0;  // |est(N_max) / est(N_max / 2) - 1|
  std::vector<std::pair<std::size_t, double>> ladder;  // (samples, pooled estimate)
};

/// Monte Carlo estimate of int_0^T0 int exp(sigma G(y)) K_s(x, y) dy ds with
/// the unnormalized heat kernel K_s, via
///   int exp(sigma G(y)) K_s(x, y) dy = (2 pi)^{n/2} E[exp(sigma G(x + sqrt(s) Z))]
/// and s ~ U(0, T0].
ConditionGResult condition_g_estimate(const VectorFieldSet& fs, double sigma, double T0,
                                      const Point& x, std::size_t samples, std::uint64_t seed,
                                      const ConditionGOptions& options = {});

/// Radial clamp: f^N(x) = f(x) for |x| <= N, f(N x / |x|) otherwise.
VectorFieldSet radial_cutoff(const VectorFieldSet& fs, double N);

}  // namespace sdem
